#include <gtest/gtest.h>

#include <cmath>

#include "chunkplan/search.hpp"
#include "test_support.hpp"

namespace chunkplan {
namespace {

void expect_rel(double actual, double expected, double tol = 1e-4) {
    EXPECT_LE(std::abs(actual - expected), tol * std::abs(expected)) << actual << " vs " << expected;
}

ModelProfile uniform_chain(std::size_t count, Elements numel) {
    ModelProfile m;
    m.name = "chain";
    for (std::size_t i = 0; i < count; ++i) {
        const auto id = "p" + std::to_string(i);
        m.parameters.push_back({id, numel, false});
        m.operators.push_back({"op" + std::to_string(i), {id}, std::nullopt});
    }
    return m;
}

TEST(AllowedMemory, DefaultsAndExactness) {
    const auto am = allowed_memory(80e9, 1e9, 10e9);
    EXPECT_EQ(am.bytes, 63'175'000'000u);
    EXPECT_FALSE(am.clamped);
    EXPECT_EQ(allowed_memory(1000, 0, 0, 1.0, 1.0).bytes, 1000u);
    EXPECT_EQ(allowed_memory(1000, 0, 0).bytes, 950u);
}

TEST(AllowedMemory, ClampsWhenReservesExceedCapacity) {
    const auto am = allowed_memory(10, 5, 8);
    EXPECT_EQ(am.bytes, 0u);
    EXPECT_TRUE(am.clamped);
    EXPECT_THROW(allowed_memory(10, 0, 0, 0.0, 1.25), Error);
    EXPECT_THROW(allowed_memory(10, 0, 0, 0.95, 0.5), Error);
    EXPECT_THROW(allowed_memory(-1, 0, 0), Error);
}

TEST(Benefits, DevServerValues) {
    const auto hw = testing::dev_server();
    const PrecisionSpec p;
    const Elements c = 1'000'000'000;
    expect_rel(benefit_I(1, c, hw, p), 0.107955);
    expect_rel(benefit_J(1, c, hw, p), 0.088766);
    expect_rel(benefit_I(4, c, hw, p), 0.030952);
    expect_rel(benefit_J(4, c, hw, p), 0.190204);
}

TEST(Benefits, IndependentRecomputation) {
    // Straight from the rate table, single GPU, C = 1e9:
    // I = C/16e9 + C/22e9; velocities 50e9 and 5e9 bytes/s are 12.5e9 and 1.25e9 elements/s.
    const double c = 1e9;
    const double i1 = c / 16e9 + c / 22e9;
    const double j1 = 1.0 / 14.0 * (4 * c / 22e9 + 2 * i1 + 2 * c / 16e9 + c / 1.25e9 - c / 12.5e9);
    const auto hw = testing::dev_server();
    expect_rel(benefit_I(1, 1'000'000'000, hw, {}), i1, 1e-12);
    expect_rel(benefit_J(1, 1'000'000'000, hw, {}), j1, 1e-12);
}

TEST(Benefits, VelocityConventionOverride) {
    const auto hw = testing::dev_server();
    const VelocityConvention raw{1.0};
    EXPECT_GT(benefit_J(1, 1000, hw, {}), benefit_J(1, 1000, hw, {}, raw));
}

TEST(Benefits, MissingTable) {
    auto hw = testing::dev_server();
    EXPECT_THROW(benefit_I(3, 10, hw, {}), Error);
}

TEST(GeometricGrid, EndpointsAndMonotone) {
    const auto g = geometric_grid(10, 10'000, 16);
    EXPECT_EQ(g.front(), 10u);
    EXPECT_EQ(g.back(), 10'000u);
    EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
    EXPECT_EQ(std::adjacent_find(g.begin(), g.end()), g.end());
    EXPECT_EQ(geometric_grid(5, 5, 16), std::vector<Elements>{5});
    EXPECT_EQ(geometric_grid(1, 3, 16), (std::vector<Elements>{1, 2, 3}));
}

TEST(SearchChunkLength, ZeroBudgetPrefersSingleChunk) {
    // Six equal parameters, one per node. With a single rCache block every
    // forward access evicts the previous chunk, and Belady then refetches it
    // in backward, unless one chunk holds everything.
    const auto m = uniform_chain(6, 10);
    const std::vector<Elements> cands = {10, 20, 30, 60};
    const auto s = search_chunk_length(m, coarsen_graph(m), cands, 0, {});
    EXPECT_EQ(s.chunk_length, 60u);
    ASSERT_EQ(s.candidates.size(), 4u);
    // n chunks, one block: n - 1 forward evictions all refetched.
    EXPECT_EQ(s.candidates[0].replaced_bytes, 5u * 2 * 10);
    EXPECT_EQ(s.candidates[1].replaced_bytes, 2u * 2 * 20);
    EXPECT_EQ(s.candidates[2].replaced_bytes, 1u * 2 * 30);
    EXPECT_EQ(s.candidates[3].replaced_bytes, 0u);
    for (const auto& c : s.candidates) EXPECT_EQ(c.n_block, 1u);
}

TEST(SearchChunkLength, TiesGoToLowerWasteThenSmallerLength) {
    const auto m = uniform_chain(6, 10);
    const std::vector<Elements> cands = {25, 20, 10};
    const auto s = search_chunk_length(m, coarsen_graph(m), cands, 1'000'000, {});
    for (const auto& c : s.candidates) EXPECT_EQ(c.replaced_bytes, 0u);
    EXPECT_DOUBLE_EQ(s.candidates[0].waste_rate, 0.2);
    EXPECT_EQ(s.chunk_length, 10u);
}

TEST(SearchChunkLength, SkipsTooSmallCandidates) {
    const auto m = uniform_chain(3, 10);
    const std::vector<Elements> small = {5, 9};
    EXPECT_THROW(search_chunk_length(m, coarsen_graph(m), small, 0, {}), Error);
    const std::vector<Elements> mixed = {5, 30};
    const auto s = search_chunk_length(m, coarsen_graph(m), mixed, 0, {});
    EXPECT_TRUE(s.candidates[0].skipped);
    EXPECT_EQ(s.chunk_length, 30u);
    EXPECT_THROW(search_chunk_length(m, coarsen_graph(m), std::span<const Elements>{}, 0, {}), Error);
}

TEST(BuildPlan, SingleGpuExtendsCacheFirst) {
    const auto m = synthesize_preset(find_preset("gpt2-4b"));
    PlanOptions opt;
    opt.gpus = 1;
    opt.candidates = std::vector<Elements>{64ull << 20};
    const auto plan = build_plan(m, testing::dev_server(), {}, opt);
    EXPECT_GT(plan.benefit_i, plan.benefit_j);
    ASSERT_FALSE(plan.decision_trace.empty());
    EXPECT_EQ(plan.decision_trace.front().action, PlanAction::extend_rcache);
    EXPECT_TRUE(plan.feasible);
}

TEST(BuildPlan, FourGpusUploadFirstInIdOrder) {
    const auto m = synthesize_preset(find_preset("gpt2-4b"));
    PlanOptions opt;
    opt.candidates = std::vector<Elements>{64ull << 20};
    const auto plan = build_plan(m, testing::dev_server(), {}, opt);
    EXPECT_GT(plan.benefit_j, plan.benefit_i);
    ASSERT_FALSE(plan.decision_trace.empty());
    EXPECT_EQ(plan.decision_trace.front().action, PlanAction::upload_chunk);
    EXPECT_EQ(plan.decision_trace.front().chunk, ChunkId{0});
    ChunkId expect = 0;
    for (const auto& d : plan.decision_trace) {
        if (d.action == PlanAction::upload_chunk) {
            EXPECT_EQ(*d.chunk, expect++);
        }
    }
    for (std::size_t c = 0; c < plan.n_chunks; ++c) {
        EXPECT_EQ(plan.chunk_homes[c] == Device::gpu, c < expect);
    }
    EXPECT_LE(plan.planned_bytes(), plan.u_allowed);
    ASSERT_TRUE(plan.estimates.has_value());
}

TEST(BuildPlan, ZeroBudgetFallsBack) {
    const auto m = synthesize_preset(find_preset("gpt2-4b"));
    PlanOptions opt;
    opt.budget.u_allowed = 0;
    const auto plan = build_plan(m, testing::dev_server(), {}, opt);
    EXPECT_FALSE(plan.feasible);
    EXPECT_EQ(plan.n_block, 1u);
    EXPECT_EQ(plan.gpu_chunks(), 0u);
    EXPECT_TRUE(plan.decision_trace.empty());
    EXPECT_FALSE(plan.estimates.has_value());
}

TEST(BuildPlan, BudgetTraceIsDecreasing) {
    const auto m = synthesize_preset(find_preset("gpt2-10b"));
    const auto plan = build_plan(m, testing::dev_server(), {});
    Bytes prev = plan.u_allowed;
    for (const auto& d : plan.decision_trace) {
        EXPECT_LT(d.budget_after, prev);
        prev = d.budget_after;
    }
}

TEST(BuildPlan, SharedEmbeddingAccounted) {
    const auto m = synthesize_preset(find_preset("gpt2-4b"));
    const auto plan = build_plan(m, testing::dev_server(), {});
    const Elements emb = 50257ull * 3072;
    EXPECT_EQ(plan.shared_elements, emb);
    EXPECT_EQ(plan.shared_strategy_bytes, 2 * emb + ceil_div(14 * emb, 4));
}

TEST(BuildPlan, GpuSubsetValidated) {
    const auto m = uniform_chain(4, 10);
    PlanOptions opt;
    opt.gpus = 8;
    EXPECT_THROW(build_plan(m, testing::dev_server(), {}, opt), Error);
    opt.gpus = 3;
    EXPECT_THROW(build_plan(m, testing::dev_server(), {}, opt), Error);
}

}  // namespace
}  // namespace chunkplan
