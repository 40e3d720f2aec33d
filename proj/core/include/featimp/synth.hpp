#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "featimp/cohort.hpp"
#include "featimp/matrix.hpp"

namespace featimp::synth {

struct CorrelatedBlock {
  std::vector<std::size_t> features;  // indices of continuous features
  double rho = 0.0;                   // pairwise equicorrelation, [0, 1)
};

/// Adds beta * sign(x_a * x_b) to the log-odds: a pure interaction no linear
/// model can represent.
struct InteractionTerm {
  std::size_t a = 0;
  std::size_t b = 0;
  double beta = 0.0;
};

struct TabularSpec {
  std::size_t n_samples = 0;
  std::size_t n_features = 0;
  std::vector<double> planted_beta;        // length n_features; zeros = noise
  std::vector<CorrelatedBlock> correlated_blocks;
  std::vector<int> categorical_levels;     // per feature: 0 continuous, 2 binary, >2 categorical
  std::vector<InteractionTerm> interactions;
  double missing_rate = 0.0;               // [0, 1)
  std::uint64_t seed = 0;
};

/// Continuous features are standard normal (equicorrelated within blocks via
/// a shared latent factor); categorical features are uniform integer codes.
/// Labels are Bernoulli(logistic(planted_beta . x + interactions)); the
/// missing mask is applied after label generation. Deterministic per seed,
/// row-wise substreams.
LabeledDataset generate_tabular(const TabularSpec& spec);

struct RecordsSpec {
  std::size_t n_patients = 0;
  std::string outcome_code = "250.00";
  std::vector<std::string> common_lab_codes;
  std::vector<std::string> rare_lab_codes;
  double disease_effect = 1.0;    // mean shift on case common labs before diagnosis
  double case_fraction = 0.3;     // planted case rate
  double ambiguous_fraction = 0.0;  // patients given 1..2 outcome codes (excluded group)
  double visits_mean = 8.0;       // Poisson visit count (floored at 3)
  double common_lab_rate = 0.8;   // per-visit measurement probability, common labs
  double rare_lab_rate = 0.05;    // per-visit measurement probability, rare labs
  int history_days = 500;         // guaranteed record span before a planted diagnosis
  std::uint64_t seed = 0;
};

/// EHR-style longitudinal records with a planted case set: every planted case
/// carries at least 3 outcome-code diagnoses and a record reaching
/// history_days before the first one; planted controls carry none.
/// Deterministic per seed, per-patient substreams.
std::vector<cohort::PatientRecord> generate_records(const RecordsSpec& spec);

/// Patient ids of the planted cases for a spec (ground truth for tests).
std::vector<std::string> planted_case_ids(const RecordsSpec& spec);

}  // namespace featimp::synth
