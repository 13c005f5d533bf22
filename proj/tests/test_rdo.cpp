#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "lfc/rdo.hpp"
#include "lfc/synthetic.hpp"

using namespace lfc;

namespace {

// Independent re-statement of the decision procedure, written as a direct
// two-pass trace over the layer lists rather than per-triple helpers.
std::map<int, RdoMode> trace_decisions(const PseudoVideoSequence& seq,
                                       const std::vector<RdoTriple>& triples,
                                       const CostTable& costs) {
  std::map<int, RdoMode> modes;
  std::vector<int> tl4, tl3;
  for (const SequenceEntry& e : seq.entries) {
    if (e.tl == 4) tl4.push_back(e.poc);
    if (e.tl == 3) tl3.push_back(e.poc);
  }
  for (int poc : tl4) {
    const ViewCosts& c = costs.at(poc);
    modes[poc] = c.j_encode <= c.j_synth ? RdoMode::kEncode : RdoMode::kSynthesize;
  }
  for (int poc : tl3) {
    const ViewCosts& c = costs.at(poc);
    bool deps_synth = true;
    for (const RdoTriple& t : triples) {
      if (t.poc_tl3 == poc) {
        deps_synth = modes.at(t.poc_tl4_a) == RdoMode::kSynthesize &&
                     modes.at(t.poc_tl4_b) == RdoMode::kSynthesize;
      }
    }
    modes[poc] = (c.j_encode > c.j_synth && deps_synth) ? RdoMode::kSynthesize : RdoMode::kEncode;
  }
  return modes;
}

}  // namespace

TEST_CASE("lagrangian cost arithmetic") {
  CHECK(lagrangian_cost(100.0, 0.05, 0.1) == doctest::Approx(100.005).epsilon(1e-12));
  CHECK(lagrangian_cost(42.0, 7.0, 0.0) == doctest::Approx(42.0));
  CHECK(lagrangian_cost(3.5, 0.0, 0.1) == doctest::Approx(3.5));  // synthesized views carry no rate
  CHECK_THROWS_AS(lagrangian_cost(-1.0, 0.0, 0.1), InvalidArgument);
  CHECK_THROWS_AS(lagrangian_cost(0.0, -0.1, 0.1), InvalidArgument);
}

TEST_CASE("all views encode when encoding is always cheaper") {
  const CodingStructure cs = build_sequence(8, 8);
  const auto triples = rdo_triples(cs.sequence);
  CostTable costs;
  for (const RdoTriple& t : triples) {
    for (int poc : {t.poc_tl4_a, t.poc_tl3, t.poc_tl4_b}) costs[poc] = {1.0, 2.0, 0.1};
  }
  for (const RdoDecision& d : decide_gop(triples, costs)) {
    CHECK(d.mode == RdoMode::kEncode);
  }
}

TEST_CASE("hand-traced triple where everything is synthesized") {
  const std::vector<RdoTriple> triples = {{1, 2, 3}};
  CostTable costs;
  costs[1] = {5.0, 3.0, 0.1};
  costs[2] = {4.0, 3.0, 0.1};
  costs[3] = {6.0, 2.0, 0.1};
  const auto decisions = decide_gop(triples, costs);
  REQUIRE(decisions.size() == 3);
  for (const RdoDecision& d : decisions) CHECK(d.mode == RdoMode::kSynthesize);
}

TEST_CASE("an encoded top-layer view forces its middle view to encode") {
  const std::vector<RdoTriple> triples = {{1, 2, 3}};
  CostTable costs;
  costs[1] = {1.0, 9.0, 0.1};    // encode wins
  costs[2] = {100.0, 0.5, 0.1};  // synthesis would win on its own cost
  costs[3] = {6.0, 2.0, 0.1};    // synthesize
  const auto decisions = decide_gop(triples, costs);
  CHECK(decisions[0].mode == RdoMode::kEncode);
  CHECK(decisions[1].mode == RdoMode::kEncode);  // forced by the dependency rule
  CHECK(decisions[2].mode == RdoMode::kSynthesize);
}

TEST_CASE("cost ties resolve to encode") {
  const std::vector<RdoTriple> triples = {{1, 2, 3}};
  CostTable costs;
  costs[1] = {2.0, 2.0, 0.1};
  costs[2] = {3.0, 3.0, 0.1};
  costs[3] = {9.0, 1.0, 0.1};
  const auto decisions = decide_gop(triples, costs);
  CHECK(decisions[0].mode == RdoMode::kEncode);
  CHECK(decisions[1].mode == RdoMode::kEncode);
  CHECK(decisions[2].mode == RdoMode::kSynthesize);
}

TEST_CASE("missing cost entries are rejected") {
  const std::vector<RdoTriple> triples = {{1, 2, 3}};
  CostTable costs;
  costs[1] = {1.0, 2.0, 0.1};
  costs[3] = {1.0, 2.0, 0.1};
  CHECK_THROWS_AS(decide_gop(triples, costs), InvalidArgument);
}

TEST_CASE("randomized tables match the independent trace and keep the invariant") {
  const CodingStructure cs = build_sequence(8, 8);
  const auto triples = rdo_triples(cs.sequence);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> cost(0.0, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    CostTable costs;
    for (const RdoTriple& t : triples) {
      for (int poc : {t.poc_tl4_a, t.poc_tl3, t.poc_tl4_b}) {
        ViewCosts c;
        c.j_encode = cost(rng);
        // Occasionally force exact ties to exercise the tie rule.
        c.j_synth = (rng() % 17 == 0) ? c.j_encode : cost(rng);
        c.rate_encode_bpp = cost(rng) / 100.0;
        costs[poc] = c;
      }
    }
    const auto decisions = decide_gop(triples, costs);
    const auto expected = trace_decisions(cs.sequence, triples, costs);
    REQUIRE(decisions.size() == 48);
    std::map<int, RdoMode> got;
    for (const RdoDecision& d : decisions) got[d.poc] = d.mode;
    CHECK(got == expected);

    // Dependency invariant: no encoded TL4 view with a synthesized TL3
    // neighbour in its triple.
    for (const RdoTriple& t : triples) {
      const bool any_tl4_encoded =
          got.at(t.poc_tl4_a) == RdoMode::kEncode || got.at(t.poc_tl4_b) == RdoMode::kEncode;
      if (any_tl4_encoded) CHECK(got.at(t.poc_tl3) == RdoMode::kEncode);
    }
  }
}

TEST_CASE("decisions are invariant under triple permutation") {
  const CodingStructure cs = build_sequence(8, 8);
  auto triples = rdo_triples(cs.sequence);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> cost(0.0, 10.0);
  CostTable costs;
  for (const RdoTriple& t : triples) {
    for (int poc : {t.poc_tl4_a, t.poc_tl3, t.poc_tl4_b}) {
      costs[poc] = {cost(rng), cost(rng), 0.01};
    }
  }
  const auto before = decide_gop(triples, costs);
  std::shuffle(triples.begin(), triples.end(), rng);
  const auto after = decide_gop(triples, costs);
  REQUIRE(before.size() == after.size());
  for (size_t i = 0; i < before.size(); ++i) {
    CHECK(before[i].poc == after[i].poc);
    CHECK(before[i].mode == after[i].mode);
  }
}

TEST_CASE("raising a view's synthesis cost never flips it to synthesize") {
  const std::vector<RdoTriple> triples = {{1, 2, 3}};
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> cost(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    CostTable costs;
    for (int poc : {1, 2, 3}) costs[poc] = {cost(rng), cost(rng), 0.01};
    const auto base = decide_gop(triples, costs);
    for (int poc : {1, 2, 3}) {
      CostTable bumped = costs;
      bumped[poc].j_synth += 1.0 + cost(rng);
      const auto after = decide_gop(triples, bumped);
      for (size_t i = 0; i < base.size(); ++i) {
        if (after[i].poc != poc) continue;
        if (base[i].mode == RdoMode::kEncode) CHECK(after[i].mode == RdoMode::kEncode);
      }
    }
  }
}

TEST_CASE("candidate evaluation drops a view with a perfect synthesizer") {
  SyntheticConfig scene;
  scene.view_width = 24;
  scene.view_height = 24;
  const LightField lf = generate_synthetic_lf(scene);
  const CodingStructure cs = build_sequence(8, 8);
  CodecConfig codec;
  codec.base_qp = 30;

  // Decode the reference layer for the trial paths.
  const LfBitstream refs_only =
      encode_sequence(lf, cs, codec, [](const SequenceEntry&) { return false; });
  std::map<int, View> decoded = decode_present_views(refs_only, cs, codec);

  RdoConfig rdo;
  // Perfect oracle: returns the original luma, so distortion is exactly 0.
  const SynthFn perfect = [&](AngularPos q) { return to_unit(lf.at(q).y); };
  const CostTable costs = evaluate_candidates(lf, cs, codec, rdo, decoded, perfect);
  CHECK(costs.size() == 48);
  const auto decisions = decide_gop(rdo_triples(cs.sequence), costs);
  for (const RdoDecision& d : decisions) {
    CHECK(d.j_synth == 0.0);
    CHECK(d.mode == RdoMode::kSynthesize);
  }

  // Deterministic for fixed inputs.
  std::map<int, View> decoded2 = decode_present_views(refs_only, cs, codec);
  const CostTable costs2 = evaluate_candidates(lf, cs, codec, rdo, decoded2, perfect);
  for (const auto& [poc, c] : costs) {
    CHECK(c.j_encode == costs2.at(poc).j_encode);
    CHECK(c.rate_encode_bpp == costs2.at(poc).rate_encode_bpp);
  }
}

TEST_CASE("decision report csv") {
  namespace fs = std::filesystem;
  const CodingStructure cs = build_sequence(8, 8);
  const auto triples = rdo_triples(cs.sequence);
  CostTable costs;
  for (const RdoTriple& t : triples) {
    for (int poc : {t.poc_tl4_a, t.poc_tl3, t.poc_tl4_b}) costs[poc] = {1.0, 2.0, 0.125};
  }
  const auto decisions = decide_gop(triples, costs);
  const fs::path path = fs::temp_directory_path() / "rdo_report.csv";
  save_decisions_csv(decisions, cs.sequence, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "poc,u,v,tl,mode,j_encode,j_synth,rate_encode_bpp");
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++lines;
  }
  CHECK(lines == 48);
  fs::remove(path);
}
