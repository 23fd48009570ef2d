#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sdot/cli_io.hpp"
#include "sdot/error.hpp"

#include <filesystem>
#include <random>
#include <string>

using namespace sdot;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("sdot_test_cli_io_" + name + "_" + std::to_string(std::random_device{}()));
    fs::remove_all(d);
    return d;
}

ErrorKind kind_of(const nlohmann::json& j) {
    try {
        config_from_json(j);
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("config was accepted");
    return ErrorKind::io;
}

std::string message_of(const nlohmann::json& j) {
    try {
        config_from_json(j);
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("canonical json sorts keys and prints doubles round-trip") {
    nlohmann::json j;
    j["b"] = 0.1;
    j["a"] = {{"z", 1}, {"y", std::nan("")}};
    j["c"] = std::vector<double>{1.0 / 3.0, -2.5};
    CHECK(canonical_json(j) == "{\"a\":{\"y\":null,\"z\":1},\"b\":0.10000000000000001,\"c\":[0.33333333333333331,-2.5]}");
    const nlohmann::json back = nlohmann::json::parse(canonical_json(j));
    CHECK(back["c"][0].get<double>() == 1.0 / 3.0);
}

TEST_CASE("empty config gets every default") {
    const ScenarioConfig c = config_from_json(nlohmann::json::object());
    CHECK(c.probe.h0 == 0.1);
    CHECK(c.probe.K == 10.0);
    CHECK(c.probe.tau == 0.25);
    CHECK(c.probe.eps == 0.05);
    CHECK(c.n == 10000);
    CHECK(c.seed == 1);
    CHECK(c.kind == ScenarioKind::convex_baseline);
    const nlohmann::json j = to_json(c);
    CHECK(j["probe"]["h0"] == 0.1);
    CHECK(j.contains("barrier_heights"));
}

TEST_CASE("config round trip is canonical-identical") {
    nlohmann::json in = {{"name", "rt"},
                         {"kind", "delta_sweep"},
                         {"deltas", {0.0, 0.01}},
                         {"n", 500},
                         {"seed", 7},
                         {"probe", {{"tau", 0.2}, {"radii", {0.1, 0.3, 0.5}}}}};
    const ScenarioConfig a = config_from_json(in);
    const ScenarioConfig b = config_from_json(to_json(a));
    CHECK(canonical_json(to_json(a)) == canonical_json(to_json(b)));
    CHECK(b.probe.tau == 0.2);
    CHECK(b.seed == 7);
    CHECK(b.kind == ScenarioKind::delta_sweep);
}

TEST_CASE("schema violations are config errors naming the field") {
    CHECK(kind_of({{"foo", 1}}) == ErrorKind::config);
    CHECK(message_of({{"foo", 1}}).find("foo") != std::string::npos);
    CHECK(message_of({{"probe", {{"x", 1}}}}).find("probe.x") != std::string::npos);
    CHECK(message_of({{"n", "many"}}).find("n") != std::string::npos);
    CHECK(kind_of({{"probe", {{"tau", 0.7}}}}) == ErrorKind::config);
    CHECK(kind_of({{"kind", "nonsense"}}) == ErrorKind::config);
    CHECK(kind_of({{"kind", "delta_sweep"}}) == ErrorKind::config);
    CHECK(kind_of({{"probe", {{"radii", {0.4, 0.2, 0.1}}}}}) == ErrorKind::config);
}

TEST_CASE("Dirichlet config defaults and validation") {
    const MaConfig c = ma_config_from_json(nlohmann::json::object());
    CHECK(c.boundary[3] == 0.5);
    CHECK(c.boundary[5] == 0.5);
    CHECK(c.method == MaMethod::newton);
    CHECK_THROWS_AS(ma_config_from_json({{"boundary", {1, 2}}}), Error);
    CHECK_THROWS_AS(ma_config_from_json({{"method", "magic"}}), Error);
    CHECK_THROWS_AS(ma_config_from_json({{"bar", 1}}), Error);
}

TEST_CASE("seed registry derives fixed offsets") {
    const auto s = seed_registry(10);
    CHECK(s.at("target_sampling") == 10);
    CHECK(s.at("pushforward_audit") == 11);
    CHECK(s.at("monotonicity_audit") == 12);
    CHECK(s.at("comparison_gap") == 13);
    CHECK(s.at("second_component_sampling") == 17);
}

TEST_CASE("empty report writes only report.json and refuses a rerun") {
    const fs::path dir = fresh_dir("empty");
    const ScenarioConfig cfg = config_from_json(nlohmann::json::object());
    const RunManifest m = write_outputs({RegularityReport{}}, cfg, dir, false);
    REQUIRE(m.files.size() == 1);
    CHECK(m.files[0].path == "report.json");
    CHECK(read_file(dir / "report.json") == "{}\n");
    CHECK(fs::exists(dir / "run_manifest.json"));
    try {
        write_outputs({RegularityReport{}}, cfg, dir, false);
        FAIL("rerun was accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::io);
    }
    CHECK_NOTHROW(write_outputs({RegularityReport{}}, cfg, dir, true));
    fs::remove_all(dir);
}

TEST_CASE("manifest checksums match the bytes on disk") {
    const fs::path dir = fresh_dir("sums");
    RegularityReport entry, summary;
    entry.body["x"] = 1;
    entry.artifacts["cells.csv"] = "site,x,y\n0,0.5,0.5\n";
    summary.body["y"] = 2.5;
    summary.artifacts["sweep.csv"] = "a,b\n1,2\n";
    summary.wall_time = 3.0;
    const ScenarioConfig cfg = config_from_json({{"seed", 4}});
    const RunManifest m = write_outputs({entry, summary}, cfg, dir, false);
    CHECK(m.files.size() == 4);
    for (const ManifestFile& f : m.files) {
        const std::string bytes = read_file(dir / f.path);
        CHECK(sha256_hex(bytes) == f.sha256);
        CHECK(bytes.size() == f.bytes);
    }
    CHECK(fs::exists(dir / "entry_0" / "cells.csv"));
    CHECK(fs::exists(dir / "sweep.csv"));
    const nlohmann::json man = nlohmann::json::parse(read_file(dir / "run_manifest.json"));
    CHECK(man["config_hash"] == sha256_hex(canonical_json(to_json(cfg))));
    CHECK(man["seeds"]["target_sampling"] == 4);
    CHECK(man["version"] == kArtifactVersion);
    // Timing lives in the manifest only.
    CHECK(read_file(dir / "report.json").find("wall") == std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("missing and malformed config files") {
    CHECK_THROWS_AS(parse_config("/nonexistent/sdot.json"), Error);
    const fs::path dir = fresh_dir("bad");
    fs::create_directories(dir);
    write_file(dir / "c.json", "{not json");
    try {
        parse_config(dir / "c.json");
        FAIL("malformed json was accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
    }
    fs::remove_all(dir);
}
