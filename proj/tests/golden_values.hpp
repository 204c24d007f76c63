// Frozen reference values. Generated by tools/freeze_goldens.cpp; do not
// edit by hand.
#pragma once

#include <cstdint>

namespace golden {

inline constexpr std::uint64_t kReferenceWeightChecksum = 0x9e0349dda347954aULL;

inline constexpr long long kEnumerationCountT50 = 473;

inline constexpr double kAlternatingPatternScore = 0.055394068579612314;

inline constexpr double kGoldenBlockProfile[] = {
    0.10722252175251519,
    0.10798816064520719,
    0.11026826448813586,
    0.11074355731454678,
    0.11766801865249316,
    0.11857482701743041,
    0.12217585391571879,
    0.12415738177186521,
};

inline constexpr double kGoldenConsecutiveDelta[] = {
    41.998371187923468,
    49.993983421480856,
    57.126962238053153,
    69.734706931657257,
    88.686824587870035,
    96.219536921091077,
    94.557352350548356,
    95.858016164387607,
    97.579198800942919,
    100.41666389918373,
    104.89453802504052,
    103.73893896223255,
    98.828057355602297,
    89.658086669911128,
    77.439354416221235,
    70.548803171665085,
    71.80871248726875,
    72.801879861409404,
    68.005636253974089,
};

inline constexpr const char* kSmallSearchWinnerBits = "10001000100100100001";

inline constexpr const char* kGoldenSearchWinnerBits = "10000010000100001001001001001001001001001001001000";

inline constexpr double kGoldenBenchBaselineScore = 0;
inline constexpr double kGoldenBenchBaselineRatio = 1;
inline constexpr double kGoldenBenchUniformScore = 0.069671262022030694;
inline constexpr double kGoldenBenchUniformRatio = 0.346091737705154;
inline constexpr double kGoldenBenchSearchedScore = 0.10610288069229201;
inline constexpr double kGoldenBenchSearchedRatio = 0.28664553204198617;
inline constexpr double kGoldenBenchSearchedSelectiveScore = 0.075329728500951598;
inline constexpr double kGoldenBenchSearchedSelectiveRatio = 0.39005275259894712;

inline constexpr double kSelectiveOverheadPct = 26.511085966693436;

}  // namespace golden
