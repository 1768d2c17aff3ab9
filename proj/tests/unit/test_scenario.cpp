#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "liao/errors.hpp"
#include "liao/report.hpp"
#include "liao/scenario.hpp"
#include "support.hpp"

using namespace liao;
using namespace liao::testing;
namespace fs = std::filesystem;
using json = nlohmann::json;

#ifndef LIAO_SOURCE_DIR
#define LIAO_SOURCE_DIR "."
#endif

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
}

std::string minimal_scenario_text(const std::string& extra = "") {
    return std::string(R"({
  "schema": "liao-scenario-v1",
  "name": "mini",
  "seed": 7,
  "field": {
    "dimension": 3,
    "components": [
      [{"coef": 1}],
      [{"coef": 1, "powers": [0, 1, 0]}],
      [{"coef": -1, "powers": [0, 0, 1]}]
    ]
  },
  "lambda_samples": [[0, 0, 0]],
  "p_minus": 1)") +
           extra + "\n}\n";
}

// Minimal structural validator for the shipped report schemas: supports
// type / required / properties / items with scalar or list "type" values.
bool matches_type(const json& value, const json& type) {
    if (type.is_array()) {
        for (const auto& t : type)
            if (matches_type(value, t)) return true;
        return false;
    }
    const std::string t = type.get<std::string>();
    if (t == "object") return value.is_object();
    if (t == "array") return value.is_array();
    if (t == "string") return value.is_string();
    if (t == "boolean") return value.is_boolean();
    if (t == "integer") return value.is_number_integer();
    if (t == "number") return value.is_number();
    if (t == "null") return value.is_null();
    return false;
}

void validate_against(const json& value, const json& schema, const std::string& where) {
    if (schema.contains("type")) {
        INFO("at ", where);
        REQUIRE(matches_type(value, schema.at("type")));
    }
    if (schema.contains("required")) {
        for (const auto& key : schema.at("required")) {
            INFO("missing key ", key.get<std::string>(), " at ", where);
            REQUIRE(value.contains(key.get<std::string>()));
        }
    }
    if (schema.contains("properties") && value.is_object()) {
        for (const auto& item : schema.at("properties").items()) {
            if (value.contains(item.key()))
                validate_against(value.at(item.key()), item.value(),
                                 where + "." + item.key());
        }
    }
    if (schema.contains("items") && value.is_array()) {
        for (std::size_t i = 0; i < value.size(); ++i)
            validate_against(value[i], schema.at("items"),
                             where + "[" + std::to_string(i) + "]");
    }
}

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("liao_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE("scenario") {

TEST_CASE("term lists evaluate with rational coefficients") {
    const Scenario sc = parse_scenario(minimal_scenario_text());
    CHECK(sc.field.dimension == 3);
    CHECK(sc.seed == 7);
    const Vector probe = vec3(0.5, 2.0, -3.0);
    CHECK(eval_field(sc.field, probe).isApprox(vec3(1.0, 2.0, 3.0), 1e-15));

    const std::string rational = R"([{"coef": "3/4", "powers": [2]}])";
    const auto terms_json = json::parse(rational);
    // Round-trip through the scenario grammar via the dichotomy block.
    const std::string text = minimal_scenario_text(
        R"(,
  "dichotomy": {
    "p": 1, "p_minus": 0,
    "A": [[[{"coef": "1/2"}]]],
    "f": [[{"coef": "3/4", "powers": [0, 1]}]],
    "eta_A": 1, "xi_A": 2, "eta_f": 1, "L_f": 0.75
  })");
    const Scenario with_block = parse_scenario(text);
    REQUIRE(with_block.dichotomy.has_value());
    Vector t_point(1);
    t_point << 0.0;
    CHECK(eval_terms(with_block.dichotomy->coefficient_terms[0][0], t_point) == 0.5);
    Vector tz(2);
    tz << 0.0, 2.0;
    CHECK(eval_terms(with_block.dichotomy->forcing_terms[0], tz) == 1.5);
}

TEST_CASE("unknown keys are listed in the error") {
    const std::string text = minimal_scenario_text(R"(,
  "numerics": {"h": 1e-3}, "extra_key": 1)");
    try {
        parse_scenario(text);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("numerics") != std::string::npos);
        CHECK(msg.find("extra_key") != std::string::npos);
    }
}

TEST_CASE("stable index outside the fiber range exits with code 2") {
    const fs::path dir = temp_dir("range");
    const std::string text = minimal_scenario_text();
    const std::string bad =
        std::string(text).replace(text.find("\"p_minus\": 1"), 13, "\"p_minus\": 3");
    spit(dir / "bad.json", bad);
    CHECK(run_scenario((dir / "bad.json").string(), Subcommand::Certify,
                       (dir / "out").string()) == 2);
}

TEST_CASE("conjugate without a perturbation exits with code 2") {
    const fs::path dir = temp_dir("nopert");
    spit(dir / "sc.json", minimal_scenario_text());
    CHECK(run_scenario((dir / "sc.json").string(), Subcommand::Conjugate,
                       (dir / "out").string()) == 2);
}

TEST_CASE("delta without a dichotomy block exits with code 2") {
    const fs::path dir = temp_dir("noblock");
    spit(dir / "sc.json", minimal_scenario_text());
    CHECK(run_scenario((dir / "sc.json").string(), Subcommand::Delta,
                       (dir / "out").string()) == 2);
}

TEST_CASE("delta subcommand: reports, schema, and determinism") {
    const fs::path scenario =
        fs::path(LIAO_SOURCE_DIR) / "scenarios" / "dichotomy_sine.json";
    const fs::path out1 = temp_dir("delta1");
    const fs::path out2 = temp_dir("delta2");
    REQUIRE(run_scenario(scenario.string(), Subcommand::Delta, out1.string()) == 0);
    REQUIRE(run_scenario(scenario.string(), Subcommand::Delta, out2.string()) == 0);

    for (const char* name :
         {"bounded_solution.csv", "delta_map.csv", "delta_summary.json", "run_meta.json"})
        CHECK(slurp(out1 / name) == slurp(out2 / name));

    const json summary = json::parse(slurp(out1 / "delta_summary.json"));
    const json schema = json::parse(
        slurp(fs::path(LIAO_SOURCE_DIR) / "docs" / "schemas" / "delta.schema.json"));
    validate_against(summary, schema, "delta_summary");
    CHECK(summary.at("class_all_pass").get<bool>());
    CHECK(summary.at("epsilon_bound").at("epsilon").get<double>() ==
          doctest::Approx(1.62));

    const json meta = json::parse(slurp(out1 / "run_meta.json"));
    const json meta_schema = json::parse(
        slurp(fs::path(LIAO_SOURCE_DIR) / "docs" / "schemas" / "run-meta.schema.json"));
    validate_against(meta, meta_schema, "run_meta");

    // CSV headers are part of the format contract.
    std::istringstream bounded(slurp(out1 / "bounded_solution.csv"));
    std::string header;
    std::getline(bounded, header);
    CHECK(header == "t,z_1,z_2,defect");
}

TEST_CASE("exponents subcommand writes the rate series with the exact header") {
    const fs::path dir = temp_dir("expo");
    // Small window override keeps this test quick.
    json doc = json::parse(slurp(fs::path(LIAO_SOURCE_DIR) / "scenarios" /
                                 "saddle_line_certify.json"));
    doc["numeric"]["window_T"] = 6.0;
    doc["lambda_samples"] = json::array({json::array({0.0, 0.0, 0.0})});
    doc["numeric"]["h"] = 1e-2;
    spit(dir / "sc.json", doc.dump(2));
    REQUIRE(run_scenario((dir / "sc.json").string(), Subcommand::Exponents,
                         (dir / "out").string()) == 0);

    std::istringstream omega(slurp(dir / "out" / "omega.csv"));
    std::string header;
    std::getline(omega, header);
    CHECK(header == "t,omega_1,omega_2");
    std::string first_row;
    std::getline(omega, first_row);
    CHECK(first_row.substr(0, 3) == "-6,");

    std::istringstream frames(slurp(dir / "out" / "frames.csv"));
    std::getline(frames, header);
    CHECK(header ==
          "t,base_1,base_2,base_3,col1_1,col1_2,col1_3,col2_1,col2_2,col2_3");
}

TEST_CASE("certify subcommand emits the aggregated report") {
    const fs::path dir = temp_dir("cert");
    json doc = json::parse(slurp(fs::path(LIAO_SOURCE_DIR) / "scenarios" /
                                 "saddle_line_certify.json"));
    doc["numeric"]["window_T"] = 12.0;
    doc["numeric"]["h"] = 5e-3;
    doc["lambda_samples"] = json::array(
        {json::array({-1.0, 0.0, 0.0}), json::array({2.0, 0.0, 0.0})});
    spit(dir / "sc.json", doc.dump(2));
    REQUIRE(run_scenario((dir / "sc.json").string(), Subcommand::Certify,
                         (dir / "out").string()) == 0);

    const json report = json::parse(slurp(dir / "out" / "certify.json"));
    const json schema = json::parse(
        slurp(fs::path(LIAO_SOURCE_DIR) / "docs" / "schemas" / "certify.schema.json"));
    validate_against(report, schema, "certify");
    CHECK(report.at("certificate").at("pass").get<bool>());
    CHECK(report.at("certificate").at("eta_hat").get<double>() ==
          doctest::Approx(1.0).epsilon(1e-6));
    CHECK(report.at("constants").at("eta").get<double>() ==
          doctest::Approx(2.0).epsilon(1e-6));
    CHECK(report.at("constants").at("xi").get<double>() ==
          doctest::Approx(2.0).epsilon(1e-3));
    CHECK(report.at("uniformity").at("inf_speed").get<double>() ==
          doctest::Approx(1.0));
}

TEST_CASE("conjugate subcommand: schema, keys, and closed-form offsets") {
    const fs::path dir = temp_dir("conj");
    json doc = json::parse(slurp(fs::path(LIAO_SOURCE_DIR) / "scenarios" /
                                 "saddle_line_constant.json"));
    // Trim to a fast variant: three samples, short residual grid.
    doc["lambda_samples"] = json::array({json::array({-1.0, 0.0, 0.0}),
                                         json::array({0.0, 0.0, 0.0}),
                                         json::array({1.0, 0.0, 0.0})});
    doc["numeric"]["window_T"] = 12.0;
    doc["numeric"]["horizon"] = 18.0;
    doc["conjugacy"]["residual_t_grid"] = json::array({-1.0, 2.0});
    spit(dir / "sc.json", doc.dump(2));
    REQUIRE(run_scenario((dir / "sc.json").string(), Subcommand::Conjugate,
                         (dir / "out").string()) == 0);

    const json report = json::parse(slurp(dir / "out" / "conjugacy.json"));
    const json schema = json::parse(slurp(
        fs::path(LIAO_SOURCE_DIR) / "docs" / "schemas" / "conjugate.schema.json"));
    validate_against(report, schema, "conjugacy");

    for (const char* key :
         {"samples", "offsets", "residuals", "config", "certificate_ref"})
        CHECK(report.contains(key));
    CHECK(report.at("summary").at("max_offset_norm").get<double>() ==
          doctest::Approx(0.01).epsilon(1e-6));
    for (const auto& off : report.at("offsets")) {
        CHECK(off.at("ok").get<bool>());
        CHECK(off.at("h")[1].get<double>() == doctest::Approx(-0.01).epsilon(1e-6));
    }

    std::istringstream residuals(slurp(dir / "out" / "residuals.csv"));
    std::string header;
    std::getline(residuals, header);
    CHECK(header == "w_1,w_2,w_3,t,residual");
}

TEST_CASE("seed override lands in the reports") {
    const fs::path dir = temp_dir("seed");
    json doc = json::parse(slurp(fs::path(LIAO_SOURCE_DIR) / "scenarios" /
                                 "dichotomy_sine.json"));
    doc["dichotomy"]["delta_probe"]["count"] = 3;
    spit(dir / "sc.json", doc.dump(2));
    REQUIRE(run_scenario((dir / "sc.json").string(), Subcommand::Delta,
                         (dir / "out").string(), 424242) == 0);
    const json meta = json::parse(slurp(dir / "out" / "run_meta.json"));
    CHECK(meta.at("seed").get<std::uint64_t>() == 424242);
    CHECK(meta.at("scenario_hash").get<std::string>().size() == 16);
}

TEST_CASE("hash function is stable") {
    CHECK(fnv1a64_hex("") == "cbf29ce484222325");
    CHECK(fnv1a64_hex("liao") != fnv1a64_hex("liao "));
}

} // TEST_SUITE
