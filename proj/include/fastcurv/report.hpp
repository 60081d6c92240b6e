// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

#pragma once

// Evaluation report serialization. The JSON layout is described in
// docs/formats.md. Everything outside the "timing" object is a pure
// function of the inputs and seeds.

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "fastcurv/baselines.hpp"
#include "fastcurv/error.hpp"
#include "fastcurv/harness.hpp"

namespace fastcurv {

inline constexpr int kReportSchemaVersion = 1;

struct ReportOptions {
  double epsilon = 1.5;
  std::optional<std::string> baseline;   // detector name for the relative column
  std::vector<double> epsilon_grid = {-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0};
};

struct EpsilonPoint {
  double epsilon;
  double tpr;
  double fpr;
};

/// Verdict rates at each threshold (machine iff score > epsilon).
inline std::vector<EpsilonPoint> epsilon_sweep(const DetectorResult& r, const std::vector<double>& grid) {
  const auto m = r.valid(r.machine_scores);
  const auto h = r.valid(r.human_scores);
  std::vector<EpsilonPoint> out;
  for (double e : grid) {
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (double s : m) tp += s > e ? 1 : 0;
    for (double s : h) fp += s > e ? 1 : 0;
    out.push_back({e, m.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(m.size()),
                   h.empty() ? 0.0 : static_cast<double>(fp) / static_cast<double>(h.size())});
  }
  return out;
}

inline std::optional<double> relative_to_baseline(const BenchReport& report, const DetectorResult& r,
                                                  const std::optional<std::string>& baseline) {
  if (!baseline || !r.roc) return std::nullopt;
  for (const auto& b : report.results) {
    if (b.name == *baseline && b.roc && b.roc->auroc < 1.0) return relative_improvement(r.roc->auroc, b.roc->auroc);
  }
  return std::nullopt;
}

namespace detail {

inline nlohmann::json scores_json(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) {
    if (std::isnan(x)) a.push_back(nullptr);
    else a.push_back(x);
  }
  return a;
}

inline std::string fmt_fpr(double f) {
  std::ostringstream os;
  os << f;
  return os.str();
}

inline std::string cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) return line.substr(colon + 2);
    }
  }
  return "unknown";
}

}  // namespace detail

inline nlohmann::json environment_json() {
  nlohmann::json env;
  env["hardware_threads"] = std::thread::hardware_concurrency();
  env["cpu"] = detail::cpu_model();
#if defined(__clang__)
  env["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  env["compiler"] = std::string("gcc ") + __VERSION__;
#else
  env["compiler"] = "unknown";
#endif
  return env;
}

inline nlohmann::json report_json(const PairedDataset& ds, const BenchReport& report, const ReportOptions& opt) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  nlohmann::json d;
  d["items"] = ds.size();
  d["prefix_tokens"] = ds.prefix_tokens;
  d["decoding"] = ds.decoding;
  d["source"] = ds.source;
  d["seed"] = ds.seed;
  d["meta"] = ds.meta;
  j["dataset"] = d;
  j["epsilon"] = opt.epsilon;
  j["baseline"] = opt.baseline ? nlohmann::json(*opt.baseline) : nlohmann::json(nullptr);

  nlohmann::json dets = nlohmann::json::array();
  nlohmann::json timing = nlohmann::json::object();
  for (const auto& r : report.results) {
    nlohmann::json x;
    x["name"] = r.name;
    x["detector"] = std::string(to_string(r.id));
    x["auroc"] = r.roc ? nlohmann::json(r.roc->auroc) : nlohmann::json(nullptr);
    const auto rel = relative_to_baseline(report, r, opt.baseline);
    x["relative_improvement"] = rel ? nlohmann::json(*rel) : nlohmann::json(nullptr);
    nlohmann::json tpr = nlohmann::json::object();
    for (const auto& [f, t] : r.tpr_at) tpr[detail::fmt_fpr(f)] = t;
    x["tpr_at_fpr"] = tpr;
    x["calls_used"] = r.calls_used;
    x["backend_calls"] = r.backend_calls;
    x["failures"] = r.failures.size();
    nlohmann::json errs = nlohmann::json::array();
    for (const auto& f : r.failures) {
      errs.push_back({{"item", f.item}, {"side", f.machine ? "machine" : "human"}, {"error", f.message}});
    }
    x["errors"] = errs;
    const auto m = r.valid(r.machine_scores);
    const auto h = r.valid(r.human_scores);
    auto mean = [](const std::vector<double>& v) {
      CompensatedSum s;
      for (double e : v) s.add(e);
      return v.empty() ? nlohmann::json(nullptr) : nlohmann::json(s.value() / static_cast<double>(v.size()));
    };
    x["machine_mean"] = mean(m);
    x["human_mean"] = mean(h);
    if (r.id == DetectorId::kFastCurvature) {
      nlohmann::json sweep = nlohmann::json::array();
      for (const auto& p : epsilon_sweep(r, opt.epsilon_grid)) {
        sweep.push_back({{"epsilon", p.epsilon}, {"tpr", p.tpr}, {"fpr", p.fpr}});
      }
      x["epsilon_sweep"] = sweep;
    }
    x["machine_scores"] = detail::scores_json(r.machine_scores);
    x["human_scores"] = detail::scores_json(r.human_scores);
    dets.push_back(std::move(x));
    timing[r.name] = r.wall_seconds;
  }
  j["detectors"] = dets;
  j["timing"] = {{"wall_seconds", timing}, {"environment", environment_json()}};
  return j;
}

// ---------------------------------------------------------------------------
// Dataset files: JSON Lines, one passage per line, human then machine for
// each pair. Every line repeats the dataset settings.

inline nlohmann::json passage_json(const Passage& p, std::size_t pair, const PairedDataset& ds) {
  return {{"pair", pair},
          {"label", std::string(to_string(p.label))},
          {"text", p.raw_text},
          {"token_ids", p.token_ids},
          {"meta", p.meta},
          {"dataset", {{"prefix_tokens", ds.prefix_tokens},
                       {"decoding", ds.decoding},
                       {"source", ds.source},
                       {"seed", ds.seed}}}};
}

inline std::string dataset_jsonl(const PairedDataset& ds) {
  std::string out;
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    out += passage_json(ds.items[i].human, i, ds).dump() + "\n";
    out += passage_json(ds.items[i].machine, i, ds).dump() + "\n";
  }
  return out;
}

/// Inverse of dataset_jsonl. Token ids must fit the given vocabulary.
inline PairedDataset parse_dataset_jsonl(std::string_view text, const Vocab& vocab) {
  PairedDataset ds;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  std::map<std::size_t, PairedItem> pairs;
  std::map<std::size_t, int> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        ds.prefix_tokens = d.value("prefix_tokens", ds.prefix_tokens);
        ds.decoding = d.value("decoding", std::string());
        ds.source = d.value("source", std::string());
        ds.seed = d.value("seed", std::uint64_t{0});
      }
      Passage p;
      p.label = parse_label(j.at("label").get<std::string>());
      p.raw_text = j.value("text", std::string());
      p.token_ids = j.at("token_ids").get<std::vector<TokenId>>();
      p.meta = j.value("meta", std::map<std::string, std::string>{});
      if (p.token_ids.empty()) throw Error(ErrorCode::kEmptyInput, "passage without tokens");
      for (TokenId id : p.token_ids) {
        if (id >= vocab.size()) throw Error(ErrorCode::kVocabMismatch, "token id outside vocabulary");
      }
      const std::size_t pair = j.at("pair").get<std::size_t>();
      if (p.label == Label::kHuman) {
        pairs[pair].human = std::move(p);
        seen[pair] |= 1;
      } else if (p.label == Label::kMachine) {
        pairs[pair].machine = std::move(p);
        seen[pair] |= 2;
      } else {
        throw Error(ErrorCode::kFormatError, "dataset passage must be labeled human or machine");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kFormatError, "dataset line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), "dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  for (auto& [i, item] : pairs) {
    if (seen[i] != 3) throw Error(ErrorCode::kFormatError, "pair " + std::to_string(i) + " is incomplete");
    ds.items.push_back(std::move(item));
  }
  if (ds.items.empty()) throw Error(ErrorCode::kEmptyInput, "dataset has no pairs");
  return ds;
}

/// One row per detector; no timing columns.
inline std::string summary_csv(const BenchReport& report, const ReportOptions& opt) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "detector,name,auroc,relative_improvement,tpr_at_1pct_fpr,tpr_at_10pct_fpr,calls_used,backend_calls,failures\n";
  for (const auto& r : report.results) {
    os << to_string(r.id) << ',' << r.name << ',';
    if (r.roc) os << r.roc->auroc;
    os << ',';
    if (const auto rel = relative_to_baseline(report, r, opt.baseline)) os << *rel;
    os << ',';
    if (r.tpr_at.contains(0.01)) os << r.tpr_at.at(0.01);
    os << ',';
    if (r.tpr_at.contains(0.1)) os << r.tpr_at.at(0.1);
    os << ',' << r.calls_used << ',' << r.backend_calls << ',' << r.failures.size() << '\n';
  }
  return os.str();
}

inline std::string roc_csv(const RocCurve& curve) {
  std::ostringstream os;
  os << std::setprecision(17) << "fpr,tpr\n";
  for (const auto& [f, t] : curve.points) os << f << ',' << t << '\n';
  return os.str();
}

/// Plain-text table for terminals.
inline std::string report_table(const BenchReport& report, const ReportOptions& opt) {
  std::ostringstream os;
  os << std::left << std::setw(22) << "detector" << std::right << std::setw(9) << "AUROC";
  if (opt.baseline) os << std::setw(12) << "rel.impr";
  os << std::setw(10) << "TPR@1%" << std::setw(10) << "TPR@10%" << std::setw(10) << "calls" << std::setw(10)
     << "failed" << std::setw(11) << "seconds" << '\n';
  os << std::fixed;
  for (const auto& r : report.results) {
    os << std::left << std::setw(22) << r.name << std::right << std::setprecision(4);
    if (r.roc) os << std::setw(9) << r.roc->auroc;
    else os << std::setw(9) << "-";
    if (opt.baseline) {
      if (const auto rel = relative_to_baseline(report, r, opt.baseline)) {
        std::ostringstream pct;
        pct << std::fixed << std::setprecision(1) << *rel * 100.0 << '%';
        os << std::setw(12) << pct.str();
      } else {
        os << std::setw(12) << "-";
      }
    }
    os << std::setw(10) << (r.tpr_at.contains(0.01) ? r.tpr_at.at(0.01) : 0.0) << std::setw(10)
       << (r.tpr_at.contains(0.1) ? r.tpr_at.at(0.1) : 0.0) << std::setw(10) << r.calls_used << std::setw(10)
       << r.failures.size() << std::setw(11) << std::setprecision(3) << r.wall_seconds << '\n';
  }
  return os.str();
}

}  // namespace fastcurv
