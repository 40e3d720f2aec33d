#include "featimp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "featimp/rng.hpp"

namespace featimp::synth {

namespace {

constexpr std::uint64_t kRowStream = 0xAB10ULL;
constexpr std::uint64_t kPatientStream = 0x9EC0ULL;
constexpr std::uint64_t kRoleStream = 0x401EULL;

double logistic(double eta) {
  if (eta >= 0.0) {
    return 1.0 / (1.0 + std::exp(-eta));
  }
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

void validate_tabular(const TabularSpec& spec) {
  if (spec.n_samples == 0 || spec.n_features == 0) {
    throw ValidationError("generate_tabular: n_samples and n_features must be positive");
  }
  if (!spec.planted_beta.empty() && spec.planted_beta.size() != spec.n_features) {
    throw ValidationError("generate_tabular: planted_beta length must equal n_features");
  }
  for (double b : spec.planted_beta) {
    if (!std::isfinite(b)) {
      throw ValidationError("generate_tabular: planted_beta must be finite");
    }
  }
  if (!spec.categorical_levels.empty() &&
      spec.categorical_levels.size() != spec.n_features) {
    throw ValidationError("generate_tabular: categorical_levels length must equal n_features");
  }
  for (int levels : spec.categorical_levels) {
    if (levels != 0 && levels < 2) {
      throw ValidationError("generate_tabular: categorical level count must be 0 or >= 2");
    }
  }
  if (!(spec.missing_rate >= 0.0 && spec.missing_rate < 1.0)) {
    throw ValidationError("generate_tabular: missing_rate must lie in [0, 1)");
  }
  std::set<std::size_t> block_members;
  for (const auto& block : spec.correlated_blocks) {
    if (!(block.rho >= 0.0 && block.rho < 1.0)) {
      throw ValidationError(
          "generate_tabular: block correlation must lie in [0, 1) for a shared-factor "
          "construction");
    }
    for (std::size_t f : block.features) {
      if (f >= spec.n_features) {
        throw ValidationError("generate_tabular: block feature index out of range");
      }
      if (!block_members.insert(f).second) {
        throw ValidationError("generate_tabular: correlated blocks must be disjoint");
      }
      if (!spec.categorical_levels.empty() && spec.categorical_levels[f] != 0) {
        throw ValidationError("generate_tabular: correlated blocks must be continuous");
      }
    }
  }
  for (const auto& term : spec.interactions) {
    if (term.a >= spec.n_features || term.b >= spec.n_features) {
      throw ValidationError("generate_tabular: interaction index out of range");
    }
  }
}

}  // namespace

LabeledDataset generate_tabular(const TabularSpec& spec) {
  validate_tabular(spec);
  const std::size_t n = spec.n_samples;
  const std::size_t d = spec.n_features;

  std::vector<int> block_of(d, -1);
  for (std::size_t b = 0; b < spec.correlated_blocks.size(); ++b) {
    for (std::size_t f : spec.correlated_blocks[b].features) {
      block_of[f] = static_cast<int>(b);
    }
  }

  LabeledDataset data;
  data.x = FeatureMatrix(n, d);
  data.y.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    rng::Rng rng(rng::mix({spec.seed, kRowStream, static_cast<std::uint64_t>(i)}));

    std::vector<double> latents(spec.correlated_blocks.size());
    for (double& z : latents) {
      z = rng.normal();
    }

    std::vector<double> row(d);
    for (std::size_t f = 0; f < d; ++f) {
      const int levels =
          spec.categorical_levels.empty() ? 0 : spec.categorical_levels[f];
      if (levels > 0) {
        row[f] = static_cast<double>(rng.uniform_int(static_cast<std::uint64_t>(levels)));
      } else if (block_of[f] >= 0) {
        const double rho = spec.correlated_blocks[static_cast<std::size_t>(block_of[f])].rho;
        row[f] = std::sqrt(rho) * latents[static_cast<std::size_t>(block_of[f])] +
                 std::sqrt(1.0 - rho) * rng.normal();
      } else {
        row[f] = rng.normal();
      }
    }

    double logit = 0.0;
    if (!spec.planted_beta.empty()) {
      for (std::size_t f = 0; f < d; ++f) {
        logit += spec.planted_beta[f] * row[f];
      }
    }
    for (const auto& term : spec.interactions) {
      const double product = row[term.a] * row[term.b];
      logit += term.beta * (product > 0.0 ? 1.0 : (product < 0.0 ? -1.0 : 0.0));
    }
    data.y[i] = rng.uniform01() < logistic(logit) ? 1 : 0;

    for (std::size_t f = 0; f < d; ++f) {
      const bool masked = spec.missing_rate > 0.0 && rng.uniform01() < spec.missing_rate;
      data.x.at(i, f) = masked ? FeatureMatrix::missing_value() : row[f];
    }
  }

  data.meta.reserve(d);
  for (std::size_t f = 0; f < d; ++f) {
    FeatureMeta m;
    m.name = "x" + std::to_string(f);
    const int levels = spec.categorical_levels.empty() ? 0 : spec.categorical_levels[f];
    if (levels == 2) {
      m.kind = FeatureKind::Binary;
    } else if (levels > 2) {
      m.kind = FeatureKind::Categorical;
      m.level_count = levels;
    }
    data.meta.push_back(std::move(m));
  }
  data.validate();
  return data;
}

namespace {

void validate_records(const RecordsSpec& spec) {
  if (spec.n_patients == 0) {
    throw ValidationError("generate_records: n_patients must be positive");
  }
  if (spec.outcome_code.empty()) {
    throw ValidationError("generate_records: outcome_code must be nonempty");
  }
  if (spec.common_lab_codes.empty()) {
    throw ValidationError("generate_records: need at least one common lab code");
  }
  std::set<std::string> common(spec.common_lab_codes.begin(), spec.common_lab_codes.end());
  for (const auto& code : spec.rare_lab_codes) {
    if (common.contains(code)) {
      throw ValidationError("generate_records: lab code in both lists: " + code);
    }
  }
  if (spec.case_fraction < 0.0 || spec.case_fraction + spec.ambiguous_fraction >= 1.0) {
    throw ValidationError("generate_records: case/ambiguous fractions must sum below 1");
  }
  if (spec.history_days < 1 || spec.visits_mean <= 0.0) {
    throw ValidationError("generate_records: history_days and visits_mean must be positive");
  }
}

enum class Role { Control, Case, Ambiguous };

Role role_of(const RecordsSpec& spec, std::size_t idx) {
  rng::Rng rng(rng::mix({spec.seed, kRoleStream, static_cast<std::uint64_t>(idx)}));
  const double u = rng.uniform01();
  if (u < spec.case_fraction) {
    return Role::Case;
  }
  if (u < spec.case_fraction + spec.ambiguous_fraction) {
    return Role::Ambiguous;
  }
  return Role::Control;
}

std::string patient_id(std::size_t idx) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "p%06zu", idx);
  return buf;
}

}  // namespace

std::vector<std::string> planted_case_ids(const RecordsSpec& spec) {
  validate_records(spec);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < spec.n_patients; ++i) {
    if (role_of(spec, i) == Role::Case) {
      ids.push_back(patient_id(i));
    }
  }
  return ids;
}

std::vector<cohort::PatientRecord> generate_records(const RecordsSpec& spec) {
  validate_records(spec);
  using cohort::Date;

  const Date window_start = cohort::date_from_ymd(2000, 1, 1);
  const Date window_end = cohort::date_from_ymd(2014, 12, 31);

  static const char* kRaces[] = {"W", "B", "A", "O"};
  static const char* kEthnicities[] = {"NH", "H"};

  std::vector<cohort::PatientRecord> records;
  records.reserve(spec.n_patients);

  for (std::size_t idx = 0; idx < spec.n_patients; ++idx) {
    const Role role = role_of(spec, idx);
    rng::Rng rng(rng::mix({spec.seed, kPatientStream, static_cast<std::uint64_t>(idx)}));

    cohort::PatientRecord rec;
    rec.id = patient_id(idx);
    rec.sex = rng.uniform_int(2) == 0 ? cohort::Sex::F : cohort::Sex::M;
    rec.birth_date = cohort::date_from_ymd(1930 + static_cast<int>(rng.uniform_int(50)),
                                           1 + static_cast<int>(rng.uniform_int(12)),
                                           1 + static_cast<int>(rng.uniform_int(28)));
    rec.race = kRaces[rng.uniform_int(4)];
    rec.ethnicity = kEthnicities[rng.uniform_int(2)];

    // Cases anchor their timeline to a planted diagnosis with a guaranteed
    // history span; other patients spread visits across the study window.
    Date diagnosis{};
    Date timeline_start = window_start;
    Date timeline_end = window_end;
    if (role == Role::Case) {
      const int lo = window_start.days + spec.history_days;
      const int hi = window_end.days - 90;
      diagnosis =
          Date{lo + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(hi - lo + 1)))};
      timeline_start = diagnosis - spec.history_days;
      timeline_end = diagnosis;
    }

    const int n_visits = std::max(3, rng.poisson(spec.visits_mean));
    std::vector<Date> visits;
    visits.reserve(static_cast<std::size_t>(n_visits));
    visits.push_back(timeline_start);  // guarantees the record span
    const int span = timeline_end.days - timeline_start.days;
    for (int v = 1; v < n_visits; ++v) {
      visits.push_back(Date{timeline_start.days +
                            static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(span + 1)))});
    }
    std::sort(visits.begin(), visits.end());

    for (const Date visit : visits) {
      const bool shifted = role == Role::Case && visit < diagnosis;
      for (const auto& code : spec.common_lab_codes) {
        if (rng.uniform01() < spec.common_lab_rate) {
          const double value = rng.normal() + (shifted ? spec.disease_effect : 0.0);
          rec.events.push_back({visit, cohort::LabResult{code, value}});
        }
      }
      for (const auto& code : spec.rare_lab_codes) {
        if (rng.uniform01() < spec.rare_lab_rate) {
          rec.events.push_back({visit, cohort::LabResult{code, rng.normal()}});
        }
      }
      // Unrelated diagnoses; never the outcome code.
      if (rng.uniform01() < 0.3) {
        rec.events.push_back({visit, cohort::Diagnosis{"401.9"}});
      }
    }

    if (role == Role::Case) {
      rec.events.push_back({diagnosis, cohort::Diagnosis{spec.outcome_code}});
      rec.events.push_back({diagnosis + 30, cohort::Diagnosis{spec.outcome_code}});
      rec.events.push_back({diagnosis + 60, cohort::Diagnosis{spec.outcome_code}});
    } else if (role == Role::Ambiguous) {
      const int count = 1 + static_cast<int>(rng.uniform_int(2));
      for (int k = 0; k < count; ++k) {
        const std::size_t at = rng.uniform_int(visits.size());
        rec.events.push_back({visits[at], cohort::Diagnosis{spec.outcome_code}});
      }
    }

    rec.sort_events();
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace featimp::synth
