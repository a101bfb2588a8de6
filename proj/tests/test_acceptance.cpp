// Acceptance battery: runs every criterion once and reports each as its own
// test case, printing the per-criterion pass/fail line.

#include <gtest/gtest.h>

#include "liftlab/verify.hpp"

using namespace liftlab;

namespace {

const std::vector<CriterionResult>& results() {
  static std::vector<CriterionResult> r = [] {
    auto res = run_acceptance();
    std::fputs(format_results(res).c_str(), stdout);
    return res;
  }();
  return r;
}

const CriterionResult& find(const std::string& id) {
  for (const CriterionResult& r : results())
    if (r.id == id) return r;
  static CriterionResult missing;
  ADD_FAILURE() << "criterion " << id << " missing from the battery";
  return missing;
}

#define ACCEPTANCE_TEST(name, id)                      \
  TEST(Acceptance, name) {                             \
    const CriterionResult& r = find(id);               \
    EXPECT_TRUE(r.pass) << id << ": " << r.detail;     \
    if (r.pass) SUCCEED() << id << ": " << r.detail;   \
  }

ACCEPTANCE_TEST(AC01_StationaryEprClosedForm, "AC-1")
ACCEPTANCE_TEST(AC02_DecompositionIdentity, "AC-2")
ACCEPTANCE_TEST(AC03_HousekeepingZeroUnderMu, "AC-3")
ACCEPTANCE_TEST(AC04_CesaroConvergence, "AC-4")
ACCEPTANCE_TEST(AC05_EnergySlope, "AC-5")
ACCEPTANCE_TEST(AC06_EntropyGrowth, "AC-6")
ACCEPTANCE_TEST(AC07_MonotoneRelativeEntropy, "AC-7")
ACCEPTANCE_TEST(AC08_FoldCommutation, "AC-8")
ACCEPTANCE_TEST(AC09_MutualInformation, "AC-9")
ACCEPTANCE_TEST(AC10_PathEstimator, "AC-10")
ACCEPTANCE_TEST(AC11_DiffusionEprOracle, "AC-11")
ACCEPTANCE_TEST(AC12_CurlCriterion, "AC-12")
ACCEPTANCE_TEST(AC13_EntropyAndCovarianceBounds, "AC-13")
ACCEPTANCE_TEST(AC14_Conservation, "AC-14")
ACCEPTANCE_TEST(AC14a_ChainMassLedger, "AC-14a")

}  // namespace
