#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hints/config.hpp"
#include "hints/errors.hpp"
#include "helpers.hpp"

using namespace hints;

TEST_CASE("defaults resolve and canonicalize to a stable hash") {
    const RunConfig cfg = resolve_config({}, {});
    CHECK(cfg.split.train_frac == 0.7);
    CHECK(cfg.stage1.fj.beta == 0.4);
    CHECK(cfg.stage2.gamma == 0.5);
    CHECK(cfg.gamma_grid == std::vector<double>{0.1, 0.3, 0.5, 0.9, 1.0});

    const auto text = canonical_text(cfg);
    // canonical text is itself a valid config reproducing the same hash
    const RunConfig back = config_from_text(text);
    CHECK(config_hash(back) == config_hash(cfg));
    CHECK(canonical_text(back) == text);

    // execution-only fields do not perturb the hash; semantic fields do
    RunConfig jobs_differ = cfg;
    jobs_differ.jobs = 16;
    jobs_differ.out_dir = "elsewhere";
    CHECK(config_hash(jobs_differ) == config_hash(cfg));
}

TEST_CASE("canonical text round-trips through the file parser") {
    const auto dir = test::scratch_dir("config_roundtrip");
    RunConfig cfg = resolve_config({}, {{"fj.beta", "0.25"}, {"stage2.gamma", "0.9"}});
    test::write_file(dir + "/c.cfg", canonical_text(cfg));
    const RunConfig back = resolve_config(load_config_file(dir + "/c.cfg"), {});
    CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("flags override file values override defaults") {
    const auto dir = test::scratch_dir("config_precedence");
    test::write_file(dir + "/c.cfg", "# comment\nstage2.gamma = 0.3\nseed=5\n");
    const auto file_kvs = load_config_file(dir + "/c.cfg");
    const RunConfig from_file = resolve_config(file_kvs, {});
    CHECK(from_file.stage2.gamma == 0.3);
    CHECK(from_file.seed == 5);

    const RunConfig with_flag = resolve_config(file_kvs, {{"stage2.gamma", "0.9"}});
    CHECK(with_flag.stage2.gamma == 0.9);
    CHECK(with_flag.seed == 5);
}

TEST_CASE("beta plus delta above one is rejected with both values named") {
    try {
        resolve_config({}, {{"fj.beta", "0.7"}, {"fj.delta", "0.5"}});
        FAIL("expected ConfigConflict");
    } catch (const ConfigConflict& e) {
        const std::string msg = e.what();
        CHECK(msg.find("beta") != std::string::npos);
        CHECK(msg.find("0.7") != std::string::npos);
        CHECK(msg.find("0.5") != std::string::npos);
    }
}

TEST_CASE("invalid keys and values raise usage errors") {
    CHECK_THROWS_AS(resolve_config({}, {{"nope.key", "1"}}), UsageError);
    CHECK_THROWS_AS(resolve_config({}, {{"fj.beta", "abc"}}), UsageError);
    CHECK_THROWS_AS(resolve_config({}, {{"stage2.gamma", "1.5"}}), UsageError);
    CHECK_THROWS_AS(resolve_config({}, {{"stage2.kernel", "4"}}), UsageError);
    CHECK_THROWS_AS(resolve_config({}, {{"variant", "unknown"}}), UsageError);
    CHECK_THROWS_AS(resolve_config({}, {{"split.train_frac", "0.9"}}), UsageError);
}

TEST_CASE("lookback must cover two decomposition periods") {
    CHECK_THROWS_AS(resolve_config({}, {{"stage2.L", "30"}, {"decomp.period", "24"}}),
                    ConfigConflict);
    CHECK_NOTHROW(resolve_config({}, {{"stage2.L", "48"}, {"decomp.period", "24"}}));
}

TEST_CASE("list fields parse and serialize") {
    const RunConfig cfg = resolve_config(
        {}, {{"seeds", "1,2,3"}, {"horizons", "96,192"}, {"sweep.gammas", "0.1,0.5"}});
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(cfg.horizons == std::vector<std::size_t>{96, 192});
    CHECK(cfg.gamma_grid == std::vector<double>{0.1, 0.5});

    const auto text = canonical_text(cfg);
    CHECK(text.find("seeds=1,2,3\n") != std::string::npos);
    CHECK(text.find("horizons=96,192\n") != std::string::npos);
}

TEST_CASE("config file parser handles comments, blanks and bad lines") {
    const auto dir = test::scratch_dir("config_file");
    test::write_file(dir + "/ok.cfg", "\n# full line comment\nseed=9 # trailing comment\n\n");
    const auto kvs = load_config_file(dir + "/ok.cfg");
    REQUIRE(kvs.size() == 1);
    CHECK(kvs[0].first == "seed");
    CHECK(kvs[0].second == "9");

    test::write_file(dir + "/bad.cfg", "seed 9\n");
    CHECK_THROWS_AS(load_config_file(dir + "/bad.cfg"), UsageError);
}

TEST_CASE("distinct configs hash differently") {
    const RunConfig a = resolve_config({}, {});
    const RunConfig b = resolve_config({}, {{"seed", "2"}});
    const RunConfig c = resolve_config({}, {{"variant", "baseline"}});
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("planted generator config derives from the run config") {
    const RunConfig cfg = resolve_config({}, {{"synth.D", "7"}, {"decomp.period", "12"},
                                              {"stage2.L", "48"}, {"seed", "123"}});
    const PlantedConfig pc = cfg.planted();
    CHECK(pc.D == 7);
    CHECK(pc.seasonal_period == 12);
    CHECK(pc.seed == 123);
    CHECK(pc.fj.beta == cfg.stage1.fj.beta);
}
