#include "featimp/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "featimp/rng.hpp"

namespace featimp::cohort {

// Civil-date conversions (days since 1970-01-01, proleptic Gregorian).

Date date_from_ymd(int year, int month, int day) {
  year -= month <= 2;
  const int era = (year >= 0 ? year : year - 399) / 400;
  const auto yoe = static_cast<unsigned>(year - era * 400);
  const auto doy = static_cast<unsigned>((153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 +
                                         day - 1);
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return Date{era * 146097 + static_cast<int>(doe) - 719468};
}

void ymd_from_date(Date d, int& year, int& month, int& day) {
  const int z = d.days + 719468;
  const int era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int y = static_cast<int>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  month = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  year = y + (month <= 2 ? 1 : 0);
}

Date parse_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
    throw ParseError("invalid ISO date: " + s);
  }
  const auto parse_int = [&](std::size_t pos, std::size_t len) {
    int value = 0;
    const char* begin = s.data() + pos;
    const auto [ptr, ec] = std::from_chars(begin, begin + len, value);
    if (ec != std::errc() || ptr != begin + len) {
      throw ParseError("invalid ISO date: " + s);
    }
    return value;
  };
  const int y = parse_int(0, 4);
  const int m = parse_int(5, 2);
  const int d = parse_int(8, 2);
  if (m < 1 || m > 12 || d < 1 || d > 31) {
    throw ParseError("invalid ISO date: " + s);
  }
  return date_from_ymd(y, m, d);
}

std::string format_iso_date(Date d) {
  int y = 0;
  int m = 0;
  int day = 0;
  ymd_from_date(d, y, m, day);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, day);
  return buf;
}

double age_years(Date birth, Date at) {
  return static_cast<double>(at.days - birth.days) / 365.25;
}

void PatientRecord::sort_events() {
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.date < b.date; });
}

RecordIndex::RecordIndex(std::span<const PatientRecord> records) {
  for (const auto& r : records) {
    if (!by_id_.emplace(r.id, &r).second) {
      throw ValidationError("duplicate patient id: " + r.id);
    }
  }
}

const PatientRecord& RecordIndex::at(const std::string& id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) {
    throw ValidationError("unknown patient id: " + id);
  }
  return *it->second;
}

ClassifyResult classify_patients(std::span<const PatientRecord> records,
                                 const CohortSpec& spec) {
  if (records.empty()) {
    throw ValidationError("classify_patients: no records");
  }
  if (spec.outcome_code.empty() || spec.min_code_count < 1 || spec.horizon_days < 0) {
    throw ValidationError("classify_patients: invalid cohort spec");
  }

  ClassifyResult result;
  for (const auto& record : records) {
    int occurrences = 0;
    Date first_occurrence{};
    for (const auto& event : record.events) {
      if (!event.is_lab() && event.diagnosis().icd9 == spec.outcome_code) {
        if (occurrences == 0) {
          first_occurrence = event.date;
        }
        ++occurrences;
      }
    }

    if (occurrences >= spec.min_code_count) {
      const Date cutoff = first_occurrence - spec.horizon_days;
      if (record.events.empty() || record.events.front().date > cutoff) {
        ++result.cases_dropped_short_history;  // record does not span the horizon
        continue;
      }
      CohortMember member;
      member.patient_id = record.id;
      member.is_case = true;
      member.index_date = first_occurrence;
      member.cutoff_date = cutoff;
      member.age_at_cutoff = std::max(0.0, age_years(record.birth_date, cutoff));
      result.cases.push_back(std::move(member));
    } else if (occurrences == 0) {
      CohortMember member;
      member.patient_id = record.id;
      member.is_case = false;
      member.index_date = record.events.empty() ? record.birth_date : record.events.back().date;
      member.cutoff_date = member.index_date - spec.horizon_days;
      member.age_at_cutoff = std::max(0.0, age_years(record.birth_date, member.cutoff_date));
      result.control_pool.push_back(std::move(member));
    } else {
      ++result.excluded_ambiguous;  // 1..min_code_count-1 occurrences: neither group
    }
  }
  return result;
}

namespace {

/// Linear-interpolation quantile on sorted data.
double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.size() == 1) {
    return sorted.front();
  }
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - std::floor(h)) * (sorted[hi] - sorted[lo]);
}

int quartile_of(double age, const std::array<double, 3>& bounds) {
  if (age <= bounds[0]) {
    return 0;
  }
  if (age <= bounds[1]) {
    return 1;
  }
  if (age <= bounds[2]) {
    return 2;
  }
  return 3;
}

}  // namespace

MatchResult match_controls(std::span<const CohortMember> cases,
                           std::span<const CohortMember> pool, const RecordIndex& records,
                           std::uint64_t seed) {
  if (pool.empty()) {
    throw ValidationError("match_controls: control pool is empty");
  }
  MatchResult result;
  if (cases.empty()) {
    return result;
  }

  std::vector<double> ages;
  ages.reserve(cases.size());
  for (const auto& c : cases) {
    ages.push_back(c.age_at_cutoff);
  }
  std::sort(ages.begin(), ages.end());
  result.age_quartile_bounds = {quantile_sorted(ages, 0.25), quantile_sorted(ages, 0.50),
                                quantile_sorted(ages, 0.75)};

  std::vector<bool> used(pool.size(), false);
  rng::Rng rng(rng::mix({seed, 0xC0407ULL}));

  for (const auto& c : cases) {
    const Sex case_sex = records.at(c.patient_id).sex;
    const int case_quartile = quartile_of(c.age_at_cutoff, result.age_quartile_bounds);

    std::vector<std::size_t> eligible;
    for (std::size_t k = 0; k < pool.size(); ++k) {
      if (used[k]) {
        continue;
      }
      const PatientRecord& rec = records.at(pool[k].patient_id);
      if (rec.sex != case_sex) {
        continue;
      }
      const double age = std::max(0.0, age_years(rec.birth_date, c.cutoff_date));
      if (quartile_of(age, result.age_quartile_bounds) == case_quartile) {
        eligible.push_back(k);
      }
    }
    if (eligible.empty()) {
      ++result.unmatched_cases;
      continue;
    }
    const std::size_t pick = eligible[rng.uniform_int(eligible.size())];
    used[pick] = true;

    const PatientRecord& rec = records.at(pool[pick].patient_id);
    CohortMember control;
    control.patient_id = pool[pick].patient_id;
    control.is_case = false;
    control.index_date = c.index_date;
    control.cutoff_date = c.cutoff_date;  // controls inherit the case's dates
    control.age_at_cutoff = std::max(0.0, age_years(rec.birth_date, control.cutoff_date));
    result.cases.push_back(c);
    result.controls.push_back(std::move(control));
  }
  return result;
}

LabConfig split_common_rare(std::span<const std::pair<std::string, double>> missing_rates,
                            double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("split_common_rare: threshold must lie in (0, 1)");
  }
  LabConfig config;
  for (const auto& [code, rate] : missing_rates) {
    if (rate < 0.0 || rate > 1.0) {
      throw ValidationError("split_common_rare: missing rate out of [0, 1] for " + code);
    }
    if (rate < threshold) {
      config.common.push_back(code);
    } else {
      config.rare.push_back(code);
    }
  }
  return config;
}

std::vector<std::pair<std::string, double>> lab_missing_rates(
    std::span<const CohortMember> members, const RecordIndex& records) {
  std::map<std::string, std::size_t> measured_counts;
  std::set<std::string> all_codes;
  for (const auto& m : members) {
    const PatientRecord& rec = records.at(m.patient_id);
    std::set<std::string> measured;
    for (const auto& event : rec.events) {
      if (!event.is_lab()) {
        continue;
      }
      all_codes.insert(event.lab().code);
      if (event.date < m.cutoff_date) {
        measured.insert(event.lab().code);
      }
    }
    for (const auto& code : measured) {
      ++measured_counts[code];
    }
  }
  std::vector<std::pair<std::string, double>> rates;
  rates.reserve(all_codes.size());
  const auto n = static_cast<double>(members.size());
  for (const auto& code : all_codes) {
    const auto it = measured_counts.find(code);
    const double measured = it == measured_counts.end() ? 0.0 : static_cast<double>(it->second);
    rates.emplace_back(code, 1.0 - measured / n);
  }
  return rates;
}

ExtractedFeatures extract_features(std::span<const CohortMember> members,
                                   const RecordIndex& records, const CohortSpec& /*spec*/,
                                   const LabConfig& labs) {
  if (members.empty()) {
    throw ValidationError("extract_features: no members");
  }

  std::map<std::string, std::size_t> common_index;
  for (std::size_t k = 0; k < labs.common.size(); ++k) {
    common_index.emplace(labs.common[k], k);
  }
  std::map<std::string, std::size_t> rare_index;
  for (std::size_t k = 0; k < labs.rare.size(); ++k) {
    rare_index.emplace(labs.rare[k], k);
  }

  // Integer codes for race/ethnicity by first appearance over the member list.
  std::map<std::string, int> race_codes;
  std::map<std::string, int> ethnicity_codes;
  for (const auto& m : members) {
    const PatientRecord& rec = records.at(m.patient_id);
    race_codes.emplace(rec.race, static_cast<int>(race_codes.size()));
    ethnicity_codes.emplace(rec.ethnicity, static_cast<int>(ethnicity_codes.size()));
  }

  const std::size_t n_demo = 4;
  const std::size_t d = n_demo + labs.common.size() + labs.rare.size();

  ExtractedFeatures out;
  out.x = FeatureMatrix(members.size(), d, FeatureMatrix::missing_value());
  out.labels.reserve(members.size());

  out.meta.push_back({"age", FeatureKind::Continuous, 0, "", false});
  out.meta.push_back({"sex", FeatureKind::Binary, 0, "", false});
  out.meta.push_back({"race", FeatureKind::Categorical,
                      std::max(2, static_cast<int>(race_codes.size())), "", false});
  out.meta.push_back({"ethnicity", FeatureKind::Categorical,
                      std::max(2, static_cast<int>(ethnicity_codes.size())), "", false});
  for (const auto& code : labs.common) {
    out.meta.push_back({code, FeatureKind::Continuous, 0, code, false});
  }
  for (const auto& code : labs.rare) {
    out.meta.push_back({code, FeatureKind::Binary, 0, code, true});
  }

  for (std::size_t i = 0; i < members.size(); ++i) {
    const CohortMember& m = members[i];
    const PatientRecord& rec = records.at(m.patient_id);

    out.x.at(i, 0) = m.age_at_cutoff;
    out.x.at(i, 1) = rec.sex == Sex::M ? 1.0 : 0.0;
    out.x.at(i, 2) = static_cast<double>(race_codes.at(rec.race));
    out.x.at(i, 3) = static_cast<double>(ethnicity_codes.at(rec.ethnicity));

    std::vector<std::vector<double>> common_values(labs.common.size());
    std::vector<std::uint8_t> rare_seen(labs.rare.size(), 0);
    for (const auto& event : rec.events) {
      if (event.date >= m.cutoff_date) {
        continue;  // only strictly pre-cutoff events may contribute
      }
      if (!event.is_lab()) {
        continue;
      }
      const auto common_it = common_index.find(event.lab().code);
      if (common_it != common_index.end()) {
        common_values[common_it->second].push_back(event.lab().value);
        continue;
      }
      const auto rare_it = rare_index.find(event.lab().code);
      if (rare_it != rare_index.end()) {
        rare_seen[rare_it->second] = 1;
      } else {
        ++out.unknown_lab_codes;
      }
    }

    for (std::size_t k = 0; k < labs.common.size(); ++k) {
      auto& values = common_values[k];
      if (values.empty()) {
        continue;  // stays missing
      }
      std::sort(values.begin(), values.end());
      const std::size_t mid = values.size() / 2;
      out.x.at(i, n_demo + k) = values.size() % 2 == 1
                                    ? values[mid]
                                    : 0.5 * (values[mid - 1] + values[mid]);
    }
    for (std::size_t k = 0; k < labs.rare.size(); ++k) {
      out.x.at(i, n_demo + labs.common.size() + k) = rare_seen[k] ? 1.0 : 0.0;
    }
    out.labels.push_back(m.is_case ? 1 : 0);
  }
  return out;
}

const LabConfig& default_lab_config() {
  static const LabConfig config{
      {"1743-4",  "10466-1", "30239-8", "BMI",     "1975-2",  "17861-6", "2028-9",
       "2075-0",  "2085-9",  "13457-7", "2160-0",  "788-0",   "785-6",   "787-2",
       "789-8",   "2345-7",  "4544-3",  "718-7",   "6690-2",  "786-4",   "751-8",
       "32623-1", "777-3",   "2823-3",  "2885-2",  "2951-2",  "2571-8",  "3094-0"},
      {"10330-9", "10334-1", "10501-5", "10535-3", "10886-0", "11572-5", "11580-8",
       "12180-6", "12187-1", "12841-3", "13964-2", "13965-9", "13967-5", "13969-1",
       "13982-4", "14338-8", "14804-9", "14957-5", "14959-1", "1763-2",  "17820-2",
       "17849-1", "17856-6", "17862-4", "1798-8",  "1825-9",  "18262-6", "1834-1",
       "19123-9", "1922-4",  "1925-7",  "1960-4",  "1968-7",  "1986-9",  "1988-5",
       "1989-3",  "1990-1",  "19994-3", "2019-8",  "2039-6",  "20433-9", "20436-2",
       "20437-0", "20438-8", "20448-7", "20563-3", "20565-8", "2064-4",  "2069-3",
       "21198-7", "2132-9",  "2143-6",  "2157-6",  "2236-8",  "2243-4",  "2276-4",
       "2284-8",  "2324-2",  "2339-0",  "2340-8",  "23860-0", "2458-8",  "2465-3",
       "2472-9",  "2498-4",  "2501-5",  "2502-3",  "2614-6",  "26498-6", "2703-7",
       "2708-6",  "2714-4",  "2731-8",  "27353-2", "2742-5",  "2744-1",  "2777-1",
       "27811-9", "27818-4", "27822-6", "28009-9", "2839-9",  "2857-1",  "2888-6",
       "2889-4",  "2965-2",  "2986-8",  "2990-0",  "2991-8",  "29958-6", "3024-7",
       "3026-2",  "3040-3",  "3051-0",  "30522-7", "3084-1",  "30934-4", "3167-4",
       "3181-5",  "3182-3",  "3255-7",  "33762-6", "38483-4", "5206-8",  "53115-2",
       "6303-2",  "71695-1", "72582-0", "72586-1", "72598-6", "739-3",   "740-1",
       "748-4",   "763-3",   "764-1"}};
  return config;
}

LabConfig load_lab_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid lab config JSON: ") + e.what());
  }
  LabConfig config;
  config.common = doc.at("common").get<std::vector<std::string>>();
  config.rare = doc.at("rare").get<std::vector<std::string>>();
  std::set<std::string> seen(config.common.begin(), config.common.end());
  for (const auto& code : config.rare) {
    if (seen.contains(code)) {
      throw ValidationError("lab code in both common and rare lists: " + code);
    }
  }
  return config;
}

void save_lab_config(const std::string& path, const LabConfig& config) {
  nlohmann::ordered_json doc;
  doc["common"] = config.common;
  doc["rare"] = config.rare;
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path);
  }
  out << doc.dump(2) << '\n';
}

namespace {

Sex sex_from_string(const std::string& s) {
  if (s == "F") {
    return Sex::F;
  }
  if (s == "M") {
    return Sex::M;
  }
  throw ParseError("invalid sex: " + s);
}

}  // namespace

std::vector<PatientRecord> load_patient_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  std::vector<PatientRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid record JSON: ") + e.what(), line_no);
    }
    try {
      PatientRecord rec;
      rec.id = doc.at("id").get<std::string>();
      if (rec.id.empty()) {
        throw ParseError("empty patient id", line_no);
      }
      rec.sex = sex_from_string(doc.at("sex").get<std::string>());
      rec.birth_date = parse_iso_date(doc.at("birth_date").get<std::string>());
      rec.race = doc.value("race", std::string{});
      rec.ethnicity = doc.value("ethnicity", std::string{});
      for (const auto& item : doc.at("events")) {
        Event event;
        event.date = parse_iso_date(item.at("date").get<std::string>());
        if (item.contains("lab")) {
          LabResult lab;
          lab.code = item["lab"].at("code").get<std::string>();
          lab.value = item["lab"].at("value").get<double>();
          if (!std::isfinite(lab.value)) {
            throw ParseError("non-finite lab value for " + rec.id, line_no);
          }
          event.payload = std::move(lab);
        } else if (item.contains("dx")) {
          event.payload = Diagnosis{item["dx"].at("icd9").get<std::string>()};
        } else {
          throw ParseError("event needs a 'lab' or 'dx' payload", line_no);
        }
        rec.events.push_back(std::move(event));
      }
      rec.sort_events();
      records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid record: ") + e.what(), line_no);
    }
  }
  return records;
}

void save_patient_records(const std::string& path, std::span<const PatientRecord> records) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path);
  }
  for (const auto& rec : records) {
    nlohmann::ordered_json doc;
    doc["id"] = rec.id;
    doc["sex"] = rec.sex == Sex::M ? "M" : "F";
    doc["birth_date"] = format_iso_date(rec.birth_date);
    doc["race"] = rec.race;
    doc["ethnicity"] = rec.ethnicity;
    nlohmann::ordered_json events = nlohmann::ordered_json::array();
    for (const auto& event : rec.events) {
      nlohmann::ordered_json item;
      item["date"] = format_iso_date(event.date);
      if (event.is_lab()) {
        item["lab"] = {{"code", event.lab().code}, {"value", event.lab().value}};
      } else {
        item["dx"] = {{"icd9", event.diagnosis().icd9}};
      }
      events.push_back(std::move(item));
    }
    doc["events"] = std::move(events);
    out << doc.dump() << '\n';
  }
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

}  // namespace featimp::cohort
