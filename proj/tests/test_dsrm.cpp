// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fdikp/dsrm.hpp"
#include "fdikp/optim.hpp"
#include "fdikp/rng.hpp"

using namespace fdikp;

namespace {

Tensor randt(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

DsrmConfig tiny_cfg() {
    DsrmConfig cfg;
    cfg.in_channels = 2;
    cfg.w1 = 4;
    cfg.w2 = 6;
    cfg.w3 = 8;
    cfg.window = 4;
    cfg.feature_channels = 8;
    return cfg;
}

void zero_all(ParamStore& store) {
    for (int p = 0; p < store.count(); ++p) {
        auto& v = store.entry(p).value;
        std::fill(v.vec().begin(), v.vec().end(), 0.0);
    }
}

} // namespace

TEST_CASE("resblock with zeroed parameters is the identity") {
    DsrmConfig cfg = tiny_cfg();
    ParamStore store;
    Rng rng(101);
    dsrm_init_params(store, cfg, "d.", rng);
    zero_all(store);
    Graph g(&store);
    Tensor x = randt({cfg.w1, 9, 9}, rng);
    int out = resblock(g, g.input(x), "d.enc.rb1");
    for (std::int64_t i = 0; i < x.size(); ++i) CHECK(g.val(out)[i] == x[i]);
}

TEST_CASE("resblock preserves shape and rejects channel mismatch") {
    DsrmConfig cfg = tiny_cfg();
    ParamStore store;
    Rng rng(102);
    dsrm_init_params(store, cfg, "d.", rng);
    Graph g(&store);
    Tensor x = randt({cfg.w1, 7, 11}, rng);
    int out = resblock(g, g.input(x), "d.enc.rb1");
    CHECK(g.val(out).shape() == x.shape());
    int bad = g.input(randt({cfg.w1 + 1, 7, 11}, rng));
    CHECK_THROWS(resblock(g, bad, "d.enc.rb1"));
}

TEST_CASE("resblock gradient passes finite differences") {
    DsrmConfig cfg = tiny_cfg();
    ParamStore store;
    Rng rng(103);
    dsrm_init_params(store, cfg, "d.", rng);
    Tensor x = randt({cfg.w1, 8, 8}, rng);
    Tensor probe = randt({cfg.w1, 8, 8}, rng);
    auto build = [&](Graph& g) {
        return g.mean_all(g.mul(resblock(g, g.input(x), "d.enc.rb1"), g.input(probe)));
    };
    CHECK(grad_check(build, store, 1e-3, rng, 60).pass);
}

TEST_CASE("ddm with zeroed parameters is the identity in every variant") {
    Rng rng(104);
    Tensor x = randt({8, 6, 6}, rng);
    for (DdmVariant v : {DdmVariant::Full, DdmVariant::SpatialOnly, DdmVariant::FrequencyOnly,
                         DdmVariant::DualBranch}) {
        DsrmConfig cfg = tiny_cfg();
        cfg.variant = v;
        ParamStore store;
        Rng init(105);
        dsrm_init_params(store, cfg, "d.", init);
        zero_all(store);
        Graph g(&store);
        int out = ddm(g, g.input(x), "d.", cfg);
        INFO("variant ", to_string(v));
        for (std::int64_t i = 0; i < x.size(); ++i) {
            if (v == DdmVariant::DualBranch) {
                // gated blend of two identity branches
                CHECK(g.val(out)[i] == doctest::Approx(x[i]).epsilon(1e-12));
            } else {
                CHECK(g.val(out)[i] == doctest::Approx(x[i]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("ddm frequency path with an identity spectral filter is the fft round trip") {
    DsrmConfig cfg = tiny_cfg();
    ParamStore store;
    Rng rng(106);
    dsrm_init_params(store, cfg, "d.", rng);
    Tensor x = randt({cfg.w3, 6, 6}, rng);

    // conv1 = I with bias B (keeps relu linear), conv2 = I with bias -B
    const int c2 = 2 * cfg.w3;
    const double big = 1000.0;
    auto& w1 = store.entry(store.index_of("d.ddm.freq.c1.w")).value;
    auto& b1 = store.entry(store.index_of("d.ddm.freq.c1.b")).value;
    auto& w2 = store.entry(store.index_of("d.ddm.freq.c2.w")).value;
    auto& b2 = store.entry(store.index_of("d.ddm.freq.c2.b")).value;
    std::fill(w1.vec().begin(), w1.vec().end(), 0.0);
    std::fill(w2.vec().begin(), w2.vec().end(), 0.0);
    for (int c = 0; c < c2; ++c) {
        w1[((static_cast<std::int64_t>(c) * c2 + c) * 3 + 1) * 3 + 1] = 1.0;
        w2[((static_cast<std::int64_t>(c) * c2 + c) * 3 + 1) * 3 + 1] = 1.0;
        b1[c] = big;
        b2[c] = -big;
    }
    Graph g(&store);
    int out = ddm_freq_path(g, g.input(x), "d.");
    for (std::int64_t i = 0; i < x.size(); ++i)
        CHECK(g.val(out)[i] == doctest::Approx(x[i]).epsilon(1e-9));
}

TEST_CASE("ddm gradient passes finite differences through attention and fft") {
    for (DdmVariant v : {DdmVariant::Full, DdmVariant::DualBranch}) {
        DsrmConfig cfg = tiny_cfg();
        cfg.variant = v;
        ParamStore store;
        Rng rng(107);
        dsrm_init_params(store, cfg, "d.", rng);
        Tensor x = randt({cfg.w3, 6, 6}, rng);
        Tensor probe = randt({cfg.w3, 6, 6}, rng);
        auto build = [&](Graph& g) {
            return g.mean_all(g.mul(ddm(g, g.input(x), "d.", cfg), g.input(probe)));
        };
        auto rep = grad_check(build, store, 1e-3, rng, 80);
        INFO("variant ", to_string(v), " worst ", rep.worst, " err ", rep.max_rel_err);
        CHECK(rep.pass);
    }
}

TEST_CASE("apu with zero hidden and zeroed gates gives half coefficients and zero state") {
    DsrmConfig cfg = tiny_cfg();
    ParamStore store;
    Rng rng(108);
    dsrm_init_params(store, cfg, "d.", rng);
    zero_all(store);
    Graph g(&store);
    Tensor feat = randt({cfg.w1, 10, 10}, rng);
    int hidden = g.input(Tensor({cfg.w1, 10, 10}));
    DsrmOut out = apu_step(g, g.input(feat), hidden, "d.");
    for (std::int64_t i = 0; i < g.val(out.coeffs).size(); ++i)
        CHECK(g.val(out.coeffs)[i] == 0.5);
    for (std::int64_t i = 0; i < g.val(out.hidden).size(); ++i)
        CHECK(g.val(out.hidden)[i] == 0.0);
}

TEST_CASE("apu coefficient maps stay inside (0,1)") {
    DsrmConfig cfg = tiny_cfg();
    ParamStore store;
    Rng rng(109);
    dsrm_init_params(store, cfg, "d.", rng);
    Graph g(&store);
    DsrmOut out = apu_step(g, g.input(randt({cfg.w1, 8, 8}, rng)),
                           g.input(randt({cfg.w1, 8, 8}, rng)), "d.");
    CHECK(g.val(out.coeffs).shape() == std::vector<int>{cfg.feature_channels, 8, 8});
    for (std::int64_t i = 0; i < g.val(out.coeffs).size(); ++i) {
        CHECK(g.val(out.coeffs)[i] > 0.0);
        CHECK(g.val(out.coeffs)[i] < 1.0);
    }
    Graph g2(&store);
    CHECK_THROWS(apu_step(g2, g2.input(randt({cfg.w1, 8, 8}, rng)),
                          g2.input(randt({cfg.w1, 6, 6}, rng)), "d."));
}

TEST_CASE("apu gradient flows through both returned values") {
    DsrmConfig cfg = tiny_cfg();
    ParamStore store;
    Rng rng(110);
    dsrm_init_params(store, cfg, "d.", rng);
    Tensor feat = randt({cfg.w1, 7, 7}, rng);
    Tensor hid = randt({cfg.w1, 7, 7}, rng);
    Tensor p1 = randt({cfg.feature_channels, 7, 7}, rng);
    Tensor p2 = randt({cfg.w1, 7, 7}, rng);
    auto build = [&](Graph& g) {
        DsrmOut out = apu_step(g, g.input(feat), g.input(hid), "d.");
        return g.add(g.mean_all(g.mul(out.coeffs, g.input(p1))),
                     g.mean_all(g.mul(out.hidden, g.input(p2))));
    };
    auto rep = grad_check(build, store, 1e-3, rng, 80);
    INFO("worst ", rep.worst, " err ", rep.max_rel_err);
    CHECK(rep.pass);
}

TEST_CASE("dsrm_forward emits full-resolution coefficient maps with the feature channel count") {
    DsrmConfig cfg = tiny_cfg();
    ParamStore store;
    Rng rng(111);
    dsrm_init_params(store, cfg, "d.", rng);
    Graph g(&store);
    Tensor img = randt({cfg.in_channels, 21, 17}, rng, 0.0, 1.0); // odd extents
    DsrmOut out = dsrm_forward(g, g.input(img), -1, "d.", cfg);
    CHECK(g.val(out.coeffs).shape() == std::vector<int>{cfg.feature_channels, 21, 17});
    CHECK(g.val(out.hidden).shape() == std::vector<int>{cfg.w1, 21, 17});
}

TEST_CASE("dsrm_forward default widths satisfy the 30-channel contract") {
    DsrmConfig cfg; // 16/32/64, 30 channels
    ParamStore store;
    Rng rng(112);
    dsrm_init_params(store, cfg, "d.", rng);
    Graph g(&store);
    Tensor img = randt({3, 24, 24}, rng, 0.0, 1.0);
    DsrmOut out = dsrm_forward(g, g.input(img), -1, "d.", cfg);
    CHECK(g.val(out.coeffs).shape() == std::vector<int>{30, 24, 24});
}

TEST_CASE("dsrm_forward is deterministic across repeated evaluation") {
    DsrmConfig cfg = tiny_cfg();
    ParamStore store;
    Rng rng(113);
    dsrm_init_params(store, cfg, "d.", rng);
    Tensor img = randt({cfg.in_channels, 12, 12}, rng, 0.0, 1.0);
    Graph g1(&store);
    DsrmOut o1 = dsrm_forward(g1, g1.input(img), -1, "d.", cfg);
    Graph g2(&store);
    DsrmOut o2 = dsrm_forward(g2, g2.input(img), -1, "d.", cfg);
    for (std::int64_t i = 0; i < g1.val(o1.coeffs).size(); ++i)
        CHECK(g1.val(o1.coeffs)[i] == g2.val(o2.coeffs)[i]);
}

TEST_CASE("zeroed dsrm collapses to the constant half map") {
    DsrmConfig cfg = tiny_cfg();
    ParamStore store;
    Rng rng(114);
    dsrm_init_params(store, cfg, "d.", rng);
    zero_all(store);
    Graph g(&store);
    DsrmOut out = dsrm_forward(g, g.input(randt({cfg.in_channels, 10, 10}, rng, 0.0, 1.0)), -1,
                               "d.", cfg);
    for (std::int64_t i = 0; i < g.val(out.coeffs).size(); ++i)
        CHECK(g.val(out.coeffs)[i] == 0.5);
    for (std::int64_t i = 0; i < g.val(out.hidden).size(); ++i)
        CHECK(g.val(out.hidden)[i] == 0.0);
}

TEST_CASE("hidden state propagation changes the next-stage coefficients") {
    DsrmConfig cfg = tiny_cfg();
    ParamStore store;
    Rng rng(115);
    dsrm_init_params(store, cfg, "d.", rng);
    Tensor img_small = randt({cfg.in_channels, 8, 8}, rng, 0.0, 1.0);
    Tensor img_big = randt({cfg.in_channels, 16, 16}, rng, 0.0, 1.0);

    Graph g(&store);
    DsrmOut first = dsrm_forward(g, g.input(img_small), -1, "d.", cfg);
    DsrmOut with_state = dsrm_forward(g, g.input(img_big), first.hidden, "d.", cfg);
    Graph g2(&store);
    DsrmOut without_state = dsrm_forward(g2, g2.input(img_big), -1, "d.", cfg);

    double diff = 0.0;
    for (std::int64_t i = 0; i < g.val(with_state.coeffs).size(); ++i)
        diff = std::max(diff, std::abs(g.val(with_state.coeffs)[i] - g2.val(without_state.coeffs)[i]));
    CHECK(diff > 0.0);
}

TEST_CASE("dsrm variants produce distinct bottleneck behavior") {
    Rng data_rng(116);
    Tensor img = randt({2, 12, 12}, data_rng, 0.0, 1.0);
    std::vector<Tensor> outputs;
    for (DdmVariant v : {DdmVariant::Full, DdmVariant::SpatialOnly, DdmVariant::FrequencyOnly,
                         DdmVariant::DualBranch}) {
        DsrmConfig cfg = tiny_cfg();
        cfg.variant = v;
        ParamStore store;
        Rng rng(117); // same seed: shared layers init identically
        dsrm_init_params(store, cfg, "d.", rng);
        Graph g(&store);
        outputs.push_back(g.val(dsrm_forward(g, g.input(img), -1, "d.", cfg).coeffs));
    }
    for (size_t a = 0; a < outputs.size(); ++a)
        for (size_t b = a + 1; b < outputs.size(); ++b) {
            double diff = 0.0;
            for (std::int64_t i = 0; i < outputs[a].size(); ++i)
                diff = std::max(diff, std::abs(outputs[a][i] - outputs[b][i]));
            CHECK(diff > 0.0);
        }
}

TEST_CASE("full dsrm gradient passes finite differences") {
    DsrmConfig cfg = tiny_cfg();
    ParamStore store;
    Rng rng(118);
    dsrm_init_params(store, cfg, "d.", rng);
    Tensor img = randt({cfg.in_channels, 10, 10}, rng, 0.0, 1.0);
    Tensor hid = randt({cfg.w1, 5, 5}, rng); // exercises the hidden resize
    Tensor p1 = randt({cfg.feature_channels, 10, 10}, rng);
    Tensor p2 = randt({cfg.w1, 10, 10}, rng);
    auto build = [&](Graph& g) {
        DsrmOut out = dsrm_forward(g, g.input(img), g.input(hid), "d.", cfg);
        return g.add(g.mean_all(g.mul(out.coeffs, g.input(p1))),
                     g.mean_all(g.mul(out.hidden, g.input(p2))));
    };
    auto rep = grad_check(build, store, 1e-3, rng, 100);
    INFO("worst ", rep.worst, " err ", rep.max_rel_err);
    CHECK(rep.pass);
}
