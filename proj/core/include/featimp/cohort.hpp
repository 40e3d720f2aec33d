#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "featimp/matrix.hpp"

namespace featimp::cohort {

/// Calendar date at day granularity, stored as days since 1970-01-01.
struct Date {
  std::int32_t days = 0;

  auto operator<=>(const Date&) const = default;

  Date operator-(int n) const { return Date{days - n}; }
  Date operator+(int n) const { return Date{days + n}; }
};

Date date_from_ymd(int year, int month, int day);
void ymd_from_date(Date d, int& year, int& month, int& day);
Date parse_iso_date(const std::string& s);  // "YYYY-MM-DD"
std::string format_iso_date(Date d);

/// Age in years between two dates (365.25-day years).
double age_years(Date birth, Date at);

enum class Sex { F, M };

struct LabResult {
  std::string code;  // LOINC label
  double value = 0.0;
};

struct Diagnosis {
  std::string icd9;
};

struct Event {
  Date date;
  std::variant<LabResult, Diagnosis> payload;

  bool is_lab() const { return std::holds_alternative<LabResult>(payload); }
  const LabResult& lab() const { return std::get<LabResult>(payload); }
  const Diagnosis& diagnosis() const { return std::get<Diagnosis>(payload); }
};

/// Longitudinal record for one patient; events are kept sorted by date.
struct PatientRecord {
  std::string id;
  Sex sex = Sex::F;
  Date birth_date;
  std::string race;
  std::string ethnicity;
  std::vector<Event> events;

  void sort_events();
};

struct CohortSpec {
  std::string outcome_code;              // ICD-9 code defining the outcome
  int min_code_count = 3;                // occurrences required for a case
  int horizon_days = 1;                  // gap between cutoff and index date
  double common_missing_threshold = 0.465;
};

struct CohortMember {
  std::string patient_id;
  bool is_case = false;
  Date index_date;   // cases: first diagnosis date; controls: assigned at matching
  Date cutoff_date;  // index_date - horizon_days
  double age_at_cutoff = 0.0;
};

/// Lookup from patient id to record; backs matching and feature extraction.
class RecordIndex {
 public:
  explicit RecordIndex(std::span<const PatientRecord> records);
  const PatientRecord& at(const std::string& id) const;

 private:
  std::map<std::string, const PatientRecord*> by_id_;
};

struct ClassifyResult {
  std::vector<CohortMember> cases;
  std::vector<CohortMember> control_pool;
  std::size_t cases_dropped_short_history = 0;
  std::size_t excluded_ambiguous = 0;  // 1..min_code_count-1 occurrences
};

/// Case: >= min_code_count diagnoses with the outcome code, indexed at the
/// first occurrence, with record history reaching horizon_days before it.
/// Control-eligible: exactly zero occurrences. Everything else is excluded.
ClassifyResult classify_patients(std::span<const PatientRecord> records,
                                 const CohortSpec& spec);

struct MatchResult {
  std::vector<CohortMember> cases;     // retained cases, aligned with controls
  std::vector<CohortMember> controls;  // one per retained case
  std::size_t unmatched_cases = 0;
  std::array<double, 3> age_quartile_bounds{};  // 25/50/75 percentiles of case ages
};

/// Samples one never-diagnosed control per case, without replacement, from
/// pool members with the same sex and the same case-distribution age
/// quartile (evaluated at the case's cutoff date). Controls inherit the
/// matched case's index date. Cases with no eligible match are dropped.
MatchResult match_controls(std::span<const CohortMember> cases,
                           std::span<const CohortMember> pool, const RecordIndex& records,
                           std::uint64_t seed);

struct LabConfig {
  std::vector<std::string> common;  // continuous features: median of pre-cutoff values
  std::vector<std::string> rare;    // binary features: measured at least once
};

/// The stock panel: 28 common measures (including BMI) and 115 rare codes.
const LabConfig& default_lab_config();

LabConfig load_lab_config(const std::string& path);  // JSON {"common": [...], "rare": [...]}
void save_lab_config(const std::string& path, const LabConfig& config);

/// common <=> missing rate strictly below the threshold.
LabConfig split_common_rare(std::span<const std::pair<std::string, double>> missing_rates,
                            double threshold);

/// Per-lab missing rate over members: fraction with no pre-cutoff value.
/// Codes are returned sorted.
std::vector<std::pair<std::string, double>> lab_missing_rates(
    std::span<const CohortMember> members, const RecordIndex& records);

struct ExtractedFeatures {
  FeatureMatrix x;  // may contain missing cells (common labs never measured)
  std::vector<FeatureMeta> meta;
  std::vector<int> labels;
  std::size_t unknown_lab_codes = 0;
};

/// Builds the modeling matrix from events strictly before each member's
/// cutoff date: per common lab the median value (missing if none), per rare
/// lab a measured-at-least-once indicator, plus age at cutoff, sex, and
/// integer-coded race and ethnicity. Label = is_case.
ExtractedFeatures extract_features(std::span<const CohortMember> members,
                                   const RecordIndex& records, const CohortSpec& spec,
                                   const LabConfig& labs);

/// JSON-lines patient records, one per line, ISO-8601 dates.
std::vector<PatientRecord> load_patient_records(const std::string& path);
void save_patient_records(const std::string& path, std::span<const PatientRecord> records);

}  // namespace featimp::cohort
