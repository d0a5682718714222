#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "drip/adam.hpp"
#include "drip/gradcheck.hpp"
#include "drip/ops.hpp"
#include "drip/param_store.hpp"

using namespace drip;

TEST_CASE("softmax basics") {
    SECTION("uniform on equal logits") {
        const Vector p = softmax(Vector{0.0, 0.0, 0.0});
        for (double x : p) CHECK(x == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SECTION("hand value (ln 2, 0)") {
        const Vector p = softmax(Vector{std::log(2.0), 0.0});
        CHECK(p[0] == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(p[1] == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SECTION("shift invariance") {
        const Vector a = softmax(Vector{1.0, -2.0, 0.5});
        const Vector b = softmax(Vector{1001.0, 998.0, 1000.5});
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(std::abs(a[i] - b[i]) < 1e-9);
    }
    SECTION("simplex property on random inputs") {
        Rng rng(3);
        for (int trial = 0; trial < 200; ++trial) {
            Vector logits(1 + rng.index(10));
            for (auto& l : logits) l = rng.normal(0.0, 5.0);
            const Vector p = softmax(logits);
            double sum = 0.0;
            for (double x : p) {
                CHECK(x > 0.0);
                sum += x;
            }
            CHECK(sum == Catch::Approx(1.0).margin(1e-6));
        }
    }
    SECTION("empty input throws") {
        Vector empty;
        CHECK_THROWS_AS(softmax(empty), DripError);
    }
}

TEST_CASE("layer norm") {
    SECTION("constant input maps to beta") {
        const Vector y = layer_norm({3.0, 3.0, 3.0}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0});
        for (double v : y) CHECK(v == Catch::Approx(0.0).margin(1e-12));
        const Vector y5 = layer_norm({3.0, 3.0}, {1.0, 1.0}, {5.0, 5.0});
        for (double v : y5) CHECK(v == Catch::Approx(5.0).margin(1e-12));
    }
    SECTION("two-point hand value with eps") {
        const Vector y = layer_norm({1.0, -1.0}, {1.0, 1.0}, {0.0, 0.0});
        const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
        CHECK(y[0] == Catch::Approx(expected).epsilon(1e-9));
        CHECK(y[1] == Catch::Approx(-expected).epsilon(1e-9));
        CHECK(y[0] == Catch::Approx(0.99999).margin(1e-5));
    }
    SECTION("zero mean unit variance for non-constant input") {
        Rng rng(11);
        Vector x(16), ones(16, 1.0), zeros(16, 0.0);
        for (auto& v : x) v = rng.normal(0.0, 3.0);
        const Vector y = layer_norm(x, ones, zeros);
        double mean = 0.0, var = 0.0;
        for (double v : y) mean += v;
        mean /= 16.0;
        for (double v : y) var += (v - mean) * (v - mean);
        var /= 16.0;
        CHECK(mean == Catch::Approx(0.0).margin(1e-12));
        CHECK(var == Catch::Approx(1.0).margin(1e-4));
    }
}

TEST_CASE("adam step") {
    SECTION("first step moves by about -lr") {
        ParamStore store;
        Param& w = store.add("w", {1});
        w.value[0] = 0.0;
        AdamState adam(store, 0.1);
        w.grad[0] = 1.0;
        adam.step(store);
        CHECK(std::abs(w.value[0] + 0.1) < 1e-6);
        CHECK(adam.step_count() == 1);
    }
    SECTION("zero gradients leave values unchanged") {
        ParamStore store;
        Param& w = store.add("w", {4});
        for (std::size_t i = 0; i < 4; ++i) w.value[i] = double(i);
        AdamState adam(store, 0.1);
        adam.step(store);
        for (std::size_t i = 0; i < 4; ++i) CHECK(w.value[i] == double(i));
        CHECK(adam.step_count() == 1);
    }
    SECTION("deterministic given identical state and grads") {
        auto run = []() {
            ParamStore store;
            Param& w = store.add("w", {3});
            w.value = {0.5, -0.25, 1.5};
            AdamState adam(store, 0.01);
            for (int i = 0; i < 5; ++i) {
                w.grad = {0.3, -0.1, 0.7};
                adam.step(store);
            }
            return w.value;
        };
        CHECK(run() == run());
    }
    SECTION("non-finite gradient names the parameter") {
        ParamStore store;
        store.add("alpha", {1});
        Param& bad = store.add("beta_weights", {1});
        AdamState adam(store, 0.1);
        bad.grad[0] = std::nan("");
        try {
            adam.step(store);
            FAIL("expected NumericalFault");
        } catch (const NumericalFault& e) {
            CHECK(std::string(e.what()).find("beta_weights") != std::string::npos);
        }
    }
}

TEST_CASE("gradient check harness") {
    SECTION("quadratic loss") {
        ParamStore store;
        Param& w = store.add("w", {8});
        Rng rng(5);
        for (auto& v : w.value) v = rng.normal(0.0, 1.0);
        auto loss_fn = [&]() {
            double l = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                l += 0.5 * w.value[i] * w.value[i];
                w.grad[i] += w.value[i];
            }
            return l;
        };
        const auto report = check_gradients(loss_fn, store, 1e-8);
        CHECK(report.ok(1e-8));
        CHECK(report.checked == 8);
    }
    SECTION("corrupted gradient is pinpointed") {
        ParamStore store;
        Param& w = store.add("w", {4});
        w.value = {0.1, 0.2, 0.3, 0.4};
        auto loss_fn = [&]() {
            double l = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                l += 0.5 * w.value[i] * w.value[i];
                w.grad[i] += w.value[i];
            }
            w.grad[2] += 0.1;  // deliberate corruption
            return l;
        };
        const auto report = check_gradients(loss_fn, store, 1e-6);
        REQUIRE_FALSE(report.failures.empty());
        CHECK(report.failures[0].param == "w");
        CHECK(report.failures[0].index == 2);
        CHECK(report.max_rel_error == Catch::Approx(0.1).epsilon(1e-2));
    }
}

TEST_CASE("checkpoint round trip") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "drip_ckpt_test.bin";
    ParamStore store;
    Param& a = store.add("a", {2, 3});
    Param& b = store.add("b", {4});
    Rng rng(9);
    for (auto& v : a.value) v = rng.normal(0.0, 1.0);
    for (auto& v : b.value) v = rng.normal(0.0, 1.0);
    CheckpointHeader hdr;
    hdr.config_hash = 0xdeadbeef;
    hdr.seed = 42;
    hdr.domain = 3;
    save_checkpoint(path.string(), store, hdr);

    ParamStore loaded;
    const CheckpointHeader got = load_checkpoint(path.string(), loaded);
    CHECK(got.config_hash == 0xdeadbeef);
    CHECK(got.seed == 42);
    CHECK(got.domain == 3);
    CHECK(loaded.get("a").value == a.value);
    CHECK(loaded.get("a").shape == a.shape);
    CHECK(loaded.get("b").value == b.value);
    fs::remove(path);

    SECTION("bad magic rejected") {
        const fs::path bad = fs::temp_directory_path() / "drip_bad_ckpt.bin";
        std::ofstream os(bad, std::ios::binary);
        os << "not a checkpoint";
        os.close();
        ParamStore dummy;
        CHECK_THROWS_AS(load_checkpoint(bad.string(), dummy), IoError);
        fs::remove(bad);
    }
}
