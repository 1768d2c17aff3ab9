#include "liao/frame.hpp"

#include <algorithm>
#include <cmath>

#include "liao/errors.hpp"

namespace liao {

namespace {

// Two-pass modified Gram-Schmidt with positive diagonal. Returns the
// orthonormalized columns; factor (when requested) satisfies B = Q * R.
Matrix gram_schmidt(const Matrix& B, Matrix* factor, double cond_limit) {
    const int m = static_cast<int>(B.cols());
    Matrix Q = B;
    Matrix R = Matrix::Zero(m, m);
    for (int j = 0; j < m; ++j) {
        Vector v = Q.col(j);
        for (int pass = 0; pass < 2; ++pass) {
            for (int i = 0; i < j; ++i) {
                const double r = Q.col(i).dot(v);
                v -= r * Q.col(i);
                R(i, j) += r;
            }
        }
        const double nrm = v.norm();
        if (!(nrm > 0.0) || !v.allFinite())
            throw DegenerateTransportError(
                "frame columns lost rank during transport; try a smaller step");
        R(j, j) = nrm;
        Q.col(j) = v / nrm;
    }
    double dmin = R(0, 0), dmax = R(0, 0);
    for (int j = 1; j < m; ++j) {
        dmin = std::min(dmin, R(j, j));
        dmax = std::max(dmax, R(j, j));
    }
    if (dmax / dmin > cond_limit)
        throw DegenerateTransportError(
            "pushed frame columns are nearly dependent (condition number above "
            "limit); try a smaller step");
    if (factor) *factor = R;
    return Q;
}

Matrix upper_triangular_inverse(const Matrix& R) {
    const int m = static_cast<int>(R.rows());
    return R.triangularView<Eigen::Upper>().solve(Matrix::Identity(m, m));
}

} // namespace

TransversalFrame TransversalFrame::create(Vector base, Vector field_at_base,
                                          Matrix columns) {
    const int n = static_cast<int>(base.size());
    if (columns.rows() != n || columns.cols() != n - 1)
        throw ValidationError("frame must have n x (n-1) columns");
    const double speed = field_at_base.norm();
    if (!(speed > 0.0)) throw SingularityError("frame base point is a singularity");

    const Matrix gram = columns.transpose() * columns;
    if ((gram - Matrix::Identity(n - 1, n - 1)).cwiseAbs().maxCoeff() > 1e-12)
        throw ValidationError("frame columns are not orthonormal");
    if ((field_at_base.transpose() * columns).cwiseAbs().maxCoeff() > 1e-12 * speed)
        throw ValidationError("frame columns are not transversal to the field");

    TransversalFrame f;
    f.base = std::move(base);
    f.field_at_base = std::move(field_at_base);
    f.columns = std::move(columns);
    return f;
}

Matrix householder_complement(const Vector& v) {
    const int n = static_cast<int>(v.size());
    const double nrm = v.norm();
    if (!(nrm > 0.0)) throw SingularityError("cannot complement the zero vector");
    Vector u = v / nrm;
    const double sign = (u[0] >= 0.0) ? 1.0 : -1.0;
    Vector h = u;
    h[0] += sign;
    const double beta = 2.0 / h.squaredNorm();
    // Columns 2..n of H = I - beta h h^T.
    Matrix cols(n, n - 1);
    for (int j = 1; j < n; ++j) {
        Vector e = Vector::Unit(n, j);
        cols.col(j - 1) = e - beta * h[j] * h;
    }
    return cols;
}

TransversalFrame orthonormal_complement(const Vector& base, const Vector& field_at_base) {
    return TransversalFrame::create(base, field_at_base,
                                    householder_complement(field_at_base));
}

std::size_t FramePath::segment_index(double t) const {
    if (times.size() < 2) return 0;
    const double pos = (t - times.front()) / step;
    auto idx = static_cast<long>(std::floor(pos));
    idx = std::clamp<long>(idx, 0, static_cast<long>(times.size()) - 2);
    return static_cast<std::size_t>(idx);
}

Vector FramePath::base_at(double t) const {
    if (times.size() < 2) return base_states.front();
    const std::size_t k = segment_index(t);
    const double theta = (t - times[k]) / step;
    const double t2 = theta * theta, t3 = t2 * theta;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + theta;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * base_states[k] + h10 * step * base_derivs[k] +
           h01 * base_states[k + 1] + h11 * step * base_derivs[k + 1];
}

Matrix FramePath::frame_at(double t) const {
    if (times.size() < 2) return frames.front();
    const std::size_t k = segment_index(t);
    const double theta = (t - times[k]) / step;
    if (theta == 0.0) return frames[k];
    if (theta == 1.0) return frames[k + 1];
    const Matrix blend = (1.0 - theta) * frames[k] + theta * frames[k + 1];
    return gram_schmidt(blend, nullptr, 1e12);
}

Matrix FramePath::frame_derivative_at(double t) const {
    if (times.size() < 2) return Matrix::Zero(frames.front().rows(), frames.front().cols());
    if (t - step < t_min() || t + step > t_max())
        throw ChartError("frame derivative requested too close to the path boundary");
    return (frame_at(t + step) - frame_at(t - step)) / (2.0 * step);
}

TransversalFrame FramePath::frame_record(std::size_t index) const {
    return TransversalFrame::create(base_states.at(index), base_derivs.at(index),
                                    frames.at(index));
}

FramePath frame_transport(const VectorFieldSpec& spec, const Vector& w0,
                          const TransversalFrame& frame0, double t_min, double t_max,
                          double h, const TransportOptions& opts) {
    spec.validate();
    if (h <= 0.0) throw ValidationError("transport step must be positive");
    if (t_min > 0.0 || t_max < 0.0)
        throw ValidationError("transport span must contain 0");
    if ((frame0.base - w0).norm() > 1e-9 * (1.0 + w0.norm()))
        throw ValidationError("initial frame is not based at the initial point");

    const int n = spec.dimension;
    const int m = n - 1;
    const long n_fwd = std::lround(std::ceil(t_max / h - 1e-9));
    const long n_bwd = std::lround(std::ceil(-t_min / h - 1e-9));
    const long total = n_bwd + n_fwd + 1;

    FramePath path;
    path.step = h;
    path.zero_index_ = static_cast<std::size_t>(n_bwd);
    path.times.resize(total);
    path.base_states.resize(total);
    path.base_derivs.resize(total);
    path.frames.resize(total);
    path.step_factors.resize(total > 1 ? total - 1 : 0);
    for (long k = 0; k < total; ++k) path.times[k] = static_cast<double>(k - n_bwd) * h;

    // Preallocated joint state (point, one-step variational) and RK4 stages.
    const int joint = n + n * n;
    Vector y(joint), ytmp(joint), k1(joint), k2(joint), k3(joint), k4(joint);
    Vector field_value(n);
    Matrix field_jac(n, n);
    const auto joint_rhs = [&](const Vector& state, Vector& dstate) {
        eval_field_and_jacobian_into(spec, state.head(n), field_value, field_jac);
        dstate.head(n) = field_value;
        Eigen::Map<const Matrix> X(state.data() + n, n, n);
        Eigen::Map<Matrix> dX(dstate.data() + n, n, n);
        dX.noalias() = field_jac * X;
    };

    // One transport step: returns the new state and the one-step variational.
    const auto push = [&](const Vector& w, double t, double dt, Vector& w_new,
                          Matrix& X_step) {
        y.head(n) = w;
        Eigen::Map<Matrix>(y.data() + n, n, n).setIdentity();
        const int sub = std::max(1, opts.substeps);
        const double hh = dt / sub;
        for (int s = 0; s < sub; ++s) {
            joint_rhs(y, k1);
            ytmp = y + (0.5 * hh) * k1;
            joint_rhs(ytmp, k2);
            ytmp = y + (0.5 * hh) * k2;
            joint_rhs(ytmp, k3);
            ytmp = y + hh * k3;
            joint_rhs(ytmp, k4);
            y += (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if (!y.allFinite())
            throw DivergenceError("transport step produced a non-finite state", t);
        w_new = y.head(n);
        X_step = Eigen::Map<const Matrix>(y.data() + n, n, n);
    };

    const auto record = [&](long k, const Vector& w, const Matrix& gamma) {
        const Vector s = eval_field(spec, w);
        if (s.norm() < opts.min_speed)
            throw SingularityError("field speed fell below 1e-12 along the path");
        path.base_states[k] = w;
        path.base_derivs[k] = s;
        path.frames[k] = gamma;
    };

    record(n_bwd, w0, frame0.columns);

    // Forward sweep.
    {
        Vector w = w0;
        Matrix gamma = frame0.columns;
        for (long k = n_bwd; k < total - 1; ++k) {
            Vector w_new;
            Matrix X_step;
            push(w, path.times[k], h, w_new, X_step);
            const Vector s_new = eval_field(spec, w_new);
            const double speed = s_new.norm();
            if (speed < opts.min_speed)
                throw SingularityError("field speed fell below 1e-12 along the path");
            Matrix B = X_step * gamma;
            const Vector shat = s_new / speed;
            B -= shat * (shat.transpose() * B);
            Matrix R(m, m);
            gamma = gram_schmidt(B, &R, opts.cond_limit);
            path.step_factors[k] = R;
            w = w_new;
            record(k + 1, w, gamma);
        }
    }

    // Backward sweep. The forward factor over a backward step is the inverse
    // of the Gram-Schmidt factor of the backward push.
    {
        Vector w = w0;
        Matrix gamma = frame0.columns;
        for (long k = n_bwd; k > 0; --k) {
            Vector w_new;
            Matrix X_step;
            push(w, path.times[k], -h, w_new, X_step);
            const Vector s_new = eval_field(spec, w_new);
            const double speed = s_new.norm();
            if (speed < opts.min_speed)
                throw SingularityError("field speed fell below 1e-12 along the path");
            Matrix B = X_step * gamma;
            const Vector shat = s_new / speed;
            B -= shat * (shat.transpose() * B);
            Matrix R(m, m);
            gamma = gram_schmidt(B, &R, opts.cond_limit);
            path.step_factors[k - 1] = upper_triangular_inverse(R);
            w = w_new;
            record(k - 1, w, gamma);
        }
    }
    return path;
}

TransversalPropagatorPath transversal_propagator(const Trajectory& traj,
                                                 const FramePath& frames) {
    if (!traj.has_variational())
        throw ValidationError("propagator needs a trajectory with fundamental matrices");
    if (frames.t_min() < traj.t_min() - 1e-12 || frames.t_max() > traj.t_max() + 1e-12)
        throw ValidationError("frame path extends beyond the trajectory span");

    TransversalPropagatorPath out;
    out.times = frames.times;
    out.matrices.reserve(frames.times.size());
    const Matrix& gamma0 = frames.frames[frames.zero_index()];
    for (std::size_t k = 0; k < frames.times.size(); ++k) {
        const double t = frames.times[k];
        const Matrix X = traj.fundamental_at(t);
        const Vector& s = frames.base_derivs[k];
        const double speed = s.norm();
        if (speed < 1e-12)
            throw SingularityError("field speed fell below 1e-12 along the path");
        const Vector shat = s / speed;
        Matrix pushed = X * gamma0;
        pushed -= shat * (shat.transpose() * pushed);
        out.matrices.push_back(frames.frames[k].transpose() * pushed);
    }
    return out;
}

TransversalPropagatorPath accumulate_propagators(const FramePath& frames) {
    const int m = frames.fiber_dimension();
    TransversalPropagatorPath out;
    out.times = frames.times;
    out.matrices.assign(frames.times.size(), Matrix::Identity(m, m));
    const std::size_t z = frames.zero_index();
    for (std::size_t k = z; k + 1 < frames.times.size(); ++k)
        out.matrices[k + 1] = frames.step_factors[k] * out.matrices[k];
    for (std::size_t k = z; k-- > 0;)
        out.matrices[k] =
            upper_triangular_inverse(frames.step_factors[k]) * out.matrices[k + 1];
    return out;
}

TransversalFrame stable_adapted_frame(const VectorFieldSpec& spec, const Vector& w,
                                      int p_minus, double estimation_time, double step) {
    const int n = spec.dimension;
    const int m = n - 1;
    if (p_minus < 0 || p_minus > m)
        throw ValidationError("stable index must lie in [0, n-1]");

    const Vector s0 = eval_field(spec, w);
    TransversalFrame raw = orthonormal_complement(w, s0);
    if (p_minus == 0 || p_minus == m) {
        // No splitting needed inside a single block; any frame works, but we
        // still align with the singular directions for deterministic output.
    }
    const FramePath path = frame_transport(spec, w, raw, 0.0, estimation_time, step);
    const TransversalPropagatorPath props = accumulate_propagators(path);
    const Matrix C = props.matrices.back();

    Eigen::JacobiSVD<Matrix> svd(C, Eigen::ComputeFullV);
    const Matrix& V = svd.matrixV(); // singular values descending

    Matrix cols(n, m);
    int out_col = 0;
    // Stable block: most contracted initial directions first.
    for (int j = m - 1; j >= m - p_minus; --j) cols.col(out_col++) = raw.columns * V.col(j);
    // Unstable block: most expanded first.
    for (int j = 0; j < m - p_minus; ++j) cols.col(out_col++) = raw.columns * V.col(j);

    // Deterministic sign: largest-magnitude entry positive.
    for (int j = 0; j < m; ++j) {
        int arg = 0;
        cols.col(j).cwiseAbs().maxCoeff(&arg);
        if (cols(arg, j) < 0.0) cols.col(j) = -cols.col(j);
    }
    return TransversalFrame::create(w, s0, cols);
}

} // namespace liao
