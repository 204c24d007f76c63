// End-to-end checks of the procache binary: exit codes, artifact files, and
// flag handling. Spawns the real executable via std::system.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "procache/serialize.hpp"

namespace fs = std::filesystem;

static int g_failures = 0;

#define CHECK_MSG(cond, msg)                                                    \
    do {                                                                        \
        if (!(cond)) {                                                          \
            std::fprintf(stderr, "FAIL: %s @ %s:%d\n", msg, __FILE__, __LINE__); \
            ++g_failures;                                                       \
        }                                                                       \
    } while (0)

namespace {

const std::string kBin = PROCACHE_BIN;

int run_cmd(const std::string& args, const std::string& log) {
    const std::string cmd = kBin + " " + args + " > " + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kSmallConfig = R"({
  "schema": 1,
  "model": {"layers": 2, "dim": 8, "heads": 2, "tokens": 4, "context_tokens": 3,
            "mlp_ratio": 2.0, "steps": 10, "seed": 5},
  "constraints": {"budget": 3, "v_min": 2, "v_max": 4, "monotonic": false},
  "search": {"quota": 3, "max_attempts": 100000, "seed": 9,
             "eval_seeds": [1], "eval_batch": 1},
  "selective": {"layer_ratio": 0.5, "token_ratio": 0.5},
  "capture_snapshots": true
})";

}  // namespace

int main() {
    const fs::path base = fs::temp_directory_path() / "procache_cli_test";
    fs::remove_all(base);
    fs::create_directories(base);
    const std::string config = (base / "config.json").string();
    const std::string log = (base / "log.txt").string();
    procache::write_text_file(config, kSmallConfig);

    // enumerate: report written, count printed.
    CHECK_MSG(run_cmd("enumerate --config " + config + " --out " + (base / "enum").string() +
                          " --list --compare-sampler",
                      log) == 0,
              "enumerate exits 0");
    CHECK_MSG(fs::exists(base / "enum" / "enumeration.json"), "enumeration.json exists");
    CHECK_MSG(fs::exists(base / "enum" / "patterns.json"), "patterns.json exists");
    CHECK_MSG(fs::exists(base / "enum" / "sampler_comparison.csv"), "comparison csv exists");

    // search: winner + candidates.
    CHECK_MSG(run_cmd("search --config " + config + " --out " + (base / "search").string(),
                      log) == 0,
              "search exits 0");
    CHECK_MSG(fs::exists(base / "search" / "best_pattern.json"), "best_pattern.json exists");
    CHECK_MSG(fs::exists(base / "search" / "candidates.csv"), "candidates.csv exists");

    // run with the winner: eval report + curves; then the report subcommand.
    const std::string pattern = (base / "search" / "best_pattern.json").string();
    CHECK_MSG(run_cmd("run --config " + config + " --pattern " + pattern + " --out " +
                          (base / "run").string(),
                      log) == 0,
              "run exits 0");
    CHECK_MSG(fs::exists(base / "run" / "eval_report.json"), "eval_report.json exists");
    CHECK_MSG(fs::exists(base / "run" / "consecutive_delta.csv"), "delta csv exists");
    CHECK_MSG(run_cmd("report " + (base / "run" / "eval_report.json").string(), log) == 0,
              "report pretty-prints an eval report");

    // run --no-selective flips the plan mode.
    CHECK_MSG(run_cmd("run --config " + config + " --pattern " + pattern + " --no-selective" +
                          " --out " + (base / "run_pure").string(),
                      log) == 0,
              "run --no-selective exits 0");
    {
        const auto j = nlohmann::ordered_json::parse(
            procache::read_text_file((base / "run_pure" / "eval_report.json").string()));
        CHECK_MSG(j.at("selective").at("enabled").get<bool>() == false,
                  "no-selective recorded in the report");
    }

    // bench: four rows, exit 0, plus report pretty-printer.
    CHECK_MSG(run_cmd("bench --config " + config + " --out " + (base / "bench").string(),
                      log) == 0,
              "bench exits 0");
    CHECK_MSG(run_cmd("report " + (base / "bench" / "bench_report.json").string(), log) == 0,
              "report pretty-prints a bench report");

    // Exit codes: bad config -> 2, infeasible search -> 3, missing args -> 2.
    procache::write_text_file((base / "bad.json").string(), "{\"schema\": 2}");
    CHECK_MSG(run_cmd("search --config " + (base / "bad.json").string(), log) == 2,
              "schema mismatch exits 2");
    CHECK_MSG(run_cmd("search", log) == 2, "missing config exits 2");
    CHECK_MSG(run_cmd("search --config " + config + " --preset dit-xl2-like", log) == 2,
              "config+preset conflict exits 2");

    const char* infeasible = R"({
      "schema": 1,
      "model": {"layers": 2, "dim": 8, "heads": 2, "tokens": 4, "context_tokens": 3,
                "mlp_ratio": 2.0, "steps": 50, "seed": 5},
      "constraints": {"budget": 2, "v_min": 0, "v_max": 3, "monotonic": false},
      "search": {"quota": 3, "max_attempts": 10000, "seed": 9,
                 "eval_seeds": [1], "eval_batch": 1},
      "selective": {"layer_ratio": 0.5, "token_ratio": 0.5}
    })";
    procache::write_text_file((base / "infeasible.json").string(), infeasible);
    CHECK_MSG(run_cmd("search --config " + (base / "infeasible.json").string() + " --out " +
                          (base / "inf").string(),
                      log) == 3,
              "infeasible search exits 3");

    // Pattern/config mismatch -> 2.
    procache::write_text_file((base / "wrong_pattern.json").string(),
                              R"({"steps": 4, "bits": [1, 0, 0, 1]})");
    CHECK_MSG(run_cmd("run --config " + config + " --pattern " +
                          (base / "wrong_pattern.json").string(),
                      log) == 2,
              "pattern length mismatch exits 2");

    // Seed override changes the searched candidates deterministically.
    CHECK_MSG(run_cmd("search --config " + config + " --seed 123 --out " +
                          (base / "seed_a").string(),
                      log) == 0,
              "seeded search a");
    CHECK_MSG(run_cmd("search --config " + config + " --seed 123 --out " +
                          (base / "seed_b").string(),
                      log) == 0,
              "seeded search b");
    CHECK_MSG(procache::read_text_file((base / "seed_a" / "candidates.csv").string()) ==
                  procache::read_text_file((base / "seed_b" / "candidates.csv").string()),
              "same seed gives byte-identical candidates");

    if (g_failures == 0) {
        fs::remove_all(base);
        std::printf("cli integration: all checks passed\n");
        return 0;
    }
    std::printf("cli integration: %d failures (artifacts kept at %s)\n", g_failures,
                base.string().c_str());
    return 1;
}
