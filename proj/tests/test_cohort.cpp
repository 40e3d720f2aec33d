#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "featimp/cohort.hpp"
#include "featimp/rng.hpp"
#include "featimp/synth.hpp"
#include "test_util.hpp"

using namespace featimp;
using namespace featimp::cohort;

namespace {

PatientRecord make_patient(const std::string& id, Sex sex, const std::string& birth,
                           std::vector<Event> events) {
  PatientRecord rec;
  rec.id = id;
  rec.sex = sex;
  rec.birth_date = parse_iso_date(birth);
  rec.race = "W";
  rec.ethnicity = "NH";
  rec.events = std::move(events);
  rec.sort_events();
  return rec;
}

Event dx(const std::string& date, const std::string& code) {
  return {parse_iso_date(date), Diagnosis{code}};
}

Event lab(const std::string& date, const std::string& code, double value) {
  return {parse_iso_date(date), LabResult{code, value}};
}

}  // namespace

TEST_CASE("date conversions round-trip across eras") {
  CHECK(parse_iso_date("1970-01-01").days == 0);
  CHECK(parse_iso_date("1970-01-02").days == 1);
  for (const auto* iso : {"1996-02-29", "2000-12-31", "2015-06-15", "1931-01-07"}) {
    CHECK(format_iso_date(parse_iso_date(iso)) == iso);
  }
  CHECK_THROWS_AS(parse_iso_date("2015-13-01"), ParseError);
  CHECK_THROWS_AS(parse_iso_date("2015-1-01"), ParseError);
}

TEST_CASE("case, control, and exclusion rules") {
  const CohortSpec spec{"250.00", 3, 30, 0.465};
  std::vector<PatientRecord> records;
  // Three occurrences: a case, indexed at the first one.
  records.push_back(make_patient("case1", Sex::F, "1950-01-01",
                                 {lab("2004-01-01", "718-7", 1.0), dx("2005-03-01", "250.00"),
                                  dx("2005-06-01", "250.00"), dx("2006-01-01", "250.00")}));
  // Zero occurrences: control-eligible.
  records.push_back(make_patient("ctrl1", Sex::F, "1951-01-01",
                                 {lab("2004-05-01", "718-7", 2.0), dx("2005-01-01", "401.9")}));
  // Two occurrences: excluded from both groups.
  records.push_back(make_patient("ambig", Sex::M, "1952-01-01",
                                 {dx("2005-01-01", "250.00"), dx("2005-02-01", "250.00")}));
  // Enough codes but the record starts after index - horizon: dropped.
  records.push_back(make_patient("short", Sex::M, "1953-01-01",
                                 {dx("2005-03-01", "250.00"), dx("2005-03-02", "250.00"),
                                  dx("2005-03-03", "250.00")}));

  const auto result = classify_patients(records, spec);
  REQUIRE(result.cases.size() == 1);
  CHECK(result.cases[0].patient_id == "case1");
  CHECK(result.cases[0].index_date == parse_iso_date("2005-03-01"));
  CHECK(result.cases[0].cutoff_date == parse_iso_date("2005-03-01") - 30);
  REQUIRE(result.control_pool.size() == 1);
  CHECK(result.control_pool[0].patient_id == "ctrl1");
  CHECK(result.excluded_ambiguous == 1);
  CHECK(result.cases_dropped_short_history == 1);
}

TEST_CASE("matching pairs each case with a same-sex same-quartile control") {
  const CohortSpec spec{"042", 3, 10, 0.465};
  std::vector<PatientRecord> records;
  rng::Rng rng(5);

  // Ten cases with a spread of ages, alternating sex.
  for (int i = 0; i < 10; ++i) {
    const Sex sex = i % 2 == 0 ? Sex::F : Sex::M;
    const int birth_year = 1935 + 4 * i;
    records.push_back(make_patient(
        "case" + std::to_string(i), sex, std::to_string(birth_year) + "-06-01",
        {lab("2000-01-01", "718-7", rng.normal()), dx("2010-05-01", "042"),
         dx("2010-06-01", "042"), dx("2010-07-01", "042")}));
  }
  // A generous pool spanning the same birth years, both sexes.
  int pool_id = 0;
  for (int year = 1933; year <= 1975; year += 2) {
    for (const Sex sex : {Sex::F, Sex::M}) {
      records.push_back(make_patient("pool" + std::to_string(pool_id++), sex,
                                     std::to_string(year) + "-03-15",
                                     {lab("2001-07-01", "718-7", rng.normal())}));
    }
  }

  const RecordIndex index(records);
  const auto classified = classify_patients(records, spec);
  REQUIRE(classified.cases.size() == 10);
  const auto matched = match_controls(classified.cases, classified.control_pool, index, 7);

  CHECK(matched.unmatched_cases == 0);
  CHECK(matched.cases.size() == 10);
  CHECK(matched.controls.size() == 10);  // cohort of 20 members total

  // Exact sex and quartile balance, plus no control reuse.
  const auto quartile = [&](double age) {
    const auto& q = matched.age_quartile_bounds;
    return age <= q[0] ? 0 : age <= q[1] ? 1 : age <= q[2] ? 2 : 3;
  };
  std::set<std::string> used;
  for (std::size_t k = 0; k < matched.cases.size(); ++k) {
    const auto& c = matched.cases[k];
    const auto& ctrl = matched.controls[k];
    CHECK(used.insert(ctrl.patient_id).second);
    CHECK(index.at(ctrl.patient_id).sex == index.at(c.patient_id).sex);
    CHECK(ctrl.index_date == c.index_date);
    CHECK(quartile(ctrl.age_at_cutoff) == quartile(c.age_at_cutoff));
    CHECK_FALSE(ctrl.is_case);
  }
}

TEST_CASE("a case with no eligible match is dropped with a warning count") {
  const CohortSpec spec{"042", 1, 0, 0.465};
  std::vector<PatientRecord> records;
  records.push_back(make_patient("case0", Sex::F, "1940-01-01",
                                 {lab("2000-01-01", "718-7", 0.1), dx("2010-01-01", "042")}));
  // Pool has the wrong sex only.
  records.push_back(
      make_patient("pool0", Sex::M, "1940-02-01", {lab("2000-01-01", "718-7", 0.2)}));

  const RecordIndex index(records);
  const auto classified = classify_patients(records, spec);
  const auto matched = match_controls(classified.cases, classified.control_pool, index, 1);
  CHECK(matched.unmatched_cases == 1);
  CHECK(matched.cases.empty());
  CHECK(matched.controls.empty());

  CHECK_THROWS_AS(
      match_controls(classified.cases, std::vector<CohortMember>{}, index, 1),
      ValidationError);
}

TEST_CASE("feature extraction takes medians strictly before the cutoff") {
  const CohortSpec spec{"042", 1, 0, 0.465};
  std::vector<PatientRecord> records;
  records.push_back(make_patient(
      "p1", Sex::M, "1950-01-01",
      {lab("2000-01-01", "718-7", 5.0), lab("2001-01-01", "718-7", 7.0),
       lab("2002-01-01", "718-7", 100.0), lab("2009-12-31", "9999-9", 1.0),
       lab("2010-01-01", "718-7", -50.0),  // on the cutoff: must not count
       dx("2010-01-01", "042")}));
  records.push_back(make_patient("p2", Sex::F, "1960-01-01", {dx("2011-01-01", "042")}));

  const RecordIndex index(records);
  CohortMember m1{"p1", true, parse_iso_date("2010-01-01"), parse_iso_date("2010-01-01"),
                  60.0};
  CohortMember m2{"p2", false, parse_iso_date("2011-01-01"), parse_iso_date("2011-01-01"),
                  51.0};

  LabConfig labs;
  labs.common = {"718-7", "2345-7"};
  labs.rare = {"10330-9"};
  const auto extracted = extract_features({{m1, m2}}, index, spec, labs);

  CHECK(extracted.meta.size() == 4 + 2 + 1);
  CHECK(extracted.x.at(0, 4) == doctest::Approx(7.0));  // median of 5, 7, 100
  CHECK(FeatureMatrix::is_missing(extracted.x.at(0, 5)));  // 2345-7 never measured
  CHECK(extracted.x.at(0, 6) == 0.0);                      // rare lab absent
  CHECK(extracted.unknown_lab_codes == 1);                 // 9999-9 ignored with a counter
  CHECK(extracted.labels == std::vector<int>{1, 0});

  // Patient with no labs at all: all common cells missing, rare indicators 0.
  CHECK(FeatureMatrix::is_missing(extracted.x.at(1, 4)));
  CHECK(FeatureMatrix::is_missing(extracted.x.at(1, 5)));
  CHECK(extracted.x.at(1, 6) == 0.0);

  // Demographics: age, sex, race, ethnicity integer codes.
  CHECK(extracted.x.at(0, 1) == 1.0);  // male
  CHECK(extracted.x.at(1, 1) == 0.0);
  CHECK(extracted.meta[0].name == "age");
  CHECK(extracted.meta[2].kind == FeatureKind::Categorical);
}

TEST_CASE("post-cutoff events never influence features") {
  // Canary: perturb events on/after the cutoff and demand a bit-identical matrix.
  synth::RecordsSpec spec;
  spec.n_patients = 150;
  spec.common_lab_codes = {"718-7", "2345-7", "BMI"};
  spec.rare_lab_codes = {"10330-9"};
  spec.seed = 77;
  auto records = synth::generate_records(spec);

  const CohortSpec cohort_spec{spec.outcome_code, 3, 182, 0.465};
  const RecordIndex index(records);
  const auto classified = classify_patients(records, cohort_spec);
  const auto matched =
      match_controls(classified.cases, classified.control_pool, index, 3);
  std::vector<CohortMember> members = matched.cases;
  members.insert(members.end(), matched.controls.begin(), matched.controls.end());
  REQUIRE_FALSE(members.empty());

  LabConfig labs;
  labs.common = spec.common_lab_codes;
  labs.rare = spec.rare_lab_codes;
  const auto baseline = extract_features(members, index, cohort_spec, labs);

  std::map<std::string, Date> cutoff_of;
  for (const auto& m : members) {
    cutoff_of[m.patient_id] = m.cutoff_date;
  }
  auto perturbed = records;
  std::size_t touched = 0;
  for (auto& rec : perturbed) {
    const auto it = cutoff_of.find(rec.id);
    if (it == cutoff_of.end()) {
      continue;
    }
    for (auto& event : rec.events) {
      if (event.date >= it->second && event.is_lab()) {
        event.payload = LabResult{std::get<LabResult>(event.payload).code, 1e9};
        ++touched;
      }
    }
  }
  REQUIRE(touched > 0);
  const RecordIndex perturbed_index(perturbed);
  const auto after = extract_features(members, perturbed_index, cohort_spec, labs);
  CHECK(after.x == baseline.x);
  CHECK(after.labels == baseline.labels);
}

TEST_CASE("raising the horizon never grows the retained case count") {
  synth::RecordsSpec spec;
  spec.n_patients = 200;
  spec.common_lab_codes = {"718-7"};
  spec.history_days = 400;
  spec.seed = 13;
  const auto records = synth::generate_records(spec);
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (const int horizon : {1, 182, 365}) {
    const CohortSpec cohort_spec{spec.outcome_code, 3, horizon, 0.465};
    const auto classified = classify_patients(records, cohort_spec);
    CHECK(classified.cases.size() <= previous);
    previous = classified.cases.size();
  }
}

TEST_CASE("common/rare split uses a strict threshold") {
  const std::vector<std::pair<std::string, double>> rates{
      {"a", 0.40}, {"b", 0.465}, {"c", 0.47}, {"d", 0.0}};
  const auto config = split_common_rare(rates, 0.465);
  CHECK(config.common == std::vector<std::string>{"a", "d"});
  CHECK(config.rare == std::vector<std::string>{"b", "c"});

  const std::vector<std::pair<std::string, double>> all_missing{{"a", 1.0}, {"b", 1.0}};
  const auto empty_common = split_common_rare(all_missing, 0.465);
  CHECK(empty_common.common.empty());
  CHECK(empty_common.rare.size() == 2);

  const std::vector<std::pair<std::string, double>> bad{{"a", 1.5}};
  CHECK_THROWS_AS(split_common_rare(bad, 0.465), ValidationError);
}

TEST_CASE("stock lab panel matches the published inventory sizes") {
  const auto& labs = default_lab_config();
  CHECK(labs.common.size() == 28);
  CHECK(labs.rare.size() == 115);
  CHECK(std::find(labs.common.begin(), labs.common.end(), "BMI") != labs.common.end());

  // 4 demographics + 28 common + 115 rare = 147 predictors.
  const CohortSpec spec{"042", 1, 0, 0.465};
  std::vector<PatientRecord> records;
  records.push_back(make_patient("p1", Sex::F, "1950-01-01", {dx("2010-01-01", "042")}));
  const RecordIndex index(records);
  const CohortMember member{"p1", true, parse_iso_date("2010-01-01"),
                            parse_iso_date("2010-01-01"), 60.0};
  const auto extracted = extract_features({{member}}, index, spec, labs);
  CHECK(extracted.meta.size() == 147);
}

TEST_CASE("patient records round-trip through json lines") {
  synth::RecordsSpec spec;
  spec.n_patients = 25;
  spec.common_lab_codes = {"718-7", "BMI"};
  spec.rare_lab_codes = {"10330-9"};
  spec.ambiguous_fraction = 0.1;
  spec.seed = 3;
  const auto records = synth::generate_records(spec);

  const auto path =
      (std::filesystem::temp_directory_path() / "featimp_records_roundtrip.jsonl").string();
  save_patient_records(path, records);
  const auto loaded = load_patient_records(path);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].id == records[i].id);
    CHECK(loaded[i].sex == records[i].sex);
    CHECK(loaded[i].birth_date == records[i].birth_date);
    REQUIRE(loaded[i].events.size() == records[i].events.size());
    for (std::size_t e = 0; e < records[i].events.size(); ++e) {
      CHECK(loaded[i].events[e].date == records[i].events[e].date);
      CHECK(loaded[i].events[e].is_lab() == records[i].events[e].is_lab());
      if (records[i].events[e].is_lab()) {
        CHECK(loaded[i].events[e].lab().code == records[i].events[e].lab().code);
        CHECK(loaded[i].events[e].lab().value == records[i].events[e].lab().value);
      }
    }
  }
}

TEST_CASE("lab missing rates count members without pre-cutoff values") {
  const CohortSpec spec{"042", 1, 0, 0.465};
  std::vector<PatientRecord> records;
  records.push_back(make_patient("p1", Sex::F, "1950-01-01",
                                 {lab("2000-01-01", "A", 1.0), dx("2010-01-01", "042")}));
  records.push_back(make_patient("p2", Sex::M, "1950-01-01",
                                 {lab("2000-01-01", "B", 1.0), dx("2010-01-01", "042")}));
  const RecordIndex index(records);
  std::vector<CohortMember> members{
      {"p1", true, parse_iso_date("2010-01-01"), parse_iso_date("2010-01-01"), 60.0},
      {"p2", true, parse_iso_date("2010-01-01"), parse_iso_date("2010-01-01"), 60.0}};
  const auto rates = lab_missing_rates(members, index);
  REQUIRE(rates.size() == 2);
  CHECK(rates[0].first == "A");
  CHECK(rates[0].second == doctest::Approx(0.5));
  CHECK(rates[1].second == doctest::Approx(0.5));
}
