// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The fastcurv Authors

// fastcurv: command-line front end.
//
//   fastcurv detect       score one passage; exit 0 human, 1 machine, 2 error
//   fastcurv make-dataset build paired human/machine passages (JSON Lines)
//   fastcurv evaluate     run detectors over a dataset, write reports
//   fastcurv benchmark    timing and call-count comparison
//   fastcurv train-lm     train and save an n-gram model

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fastcurv/fastcurv.hpp"

namespace fs = std::filesystem;
using namespace fastcurv;

namespace {

constexpr int kExitHuman = 0;
constexpr int kExitMachine = 1;
constexpr int kExitError = 2;

struct Options {
  std::string backend = "builtin";
  std::string sampling_backend;
  std::string vocab_from = "builtin";
  std::string perturb_model;
  std::string auth_env;
  std::string corpus = "builtin";
  std::string dataset;
  std::string detectors;
  std::string decoding;
  std::string attack;
  std::string baseline;
  std::string out;
  std::string text;
  std::string file;
  std::string detector = "fast_curvature";
  std::string estimator = "analytical";
  std::size_t n = 0;  // 0: command default
  std::size_t prefix_tokens = 30;
  std::size_t truncate_words = 0;
  std::size_t perturbations = 100;
  std::size_t samples = kDefaultSampleCount;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  double epsilon = 1.5;
  // train-lm
  int order = 3;
  double alpha = lm::NgramParams{}.alpha;
  std::vector<double> lambdas;
  std::size_t vocab_cap = lm::kDefaultVocabCap;
};

/// Lazily built resources shared by one invocation.
class Context {
 public:
  explicit Context(const Options& opt) : opt_(opt) {}

  const DeskSetup& desk() {
    if (!desk_) desk_ = build_desk();
    return *desk_;
  }

  BackendPtr backend(const std::string& spec) {
    if (spec == "builtin") {
      return std::make_shared<LocalModelBackend>(desk().model, "builtin");
    }
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "bad backend spec '" + spec + "'");
    const std::string kind = spec.substr(0, colon);
    const std::string arg = spec.substr(colon + 1);
    if (kind == "model") {
      auto model = std::make_shared<const lm::NgramModel>(lm::load_model(arg));
      return std::make_shared<LocalModelBackend>(model, "model:" + fs::path(arg).filename().string());
    }
    if (kind == "logits") return std::make_shared<LogitsStoreBackend>(arg, "logits:" + fs::path(arg).filename().string());
    if (kind == "remote") {
      std::ifstream in(arg);
      if (!in) throw Error(ErrorCode::kIoError, "cannot open " + arg);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kInvalidArgument, std::string("remote config: ") + e.what());
      }
      RemoteBackendConfig cfg = RemoteBackendConfig::from_json(j);
      if (!opt_.auth_env.empty()) cfg.auth_env = opt_.auth_env;
      return std::make_shared<RemoteBackend>(cfg, vocab_from(opt_.vocab_from));
    }
    throw Error(ErrorCode::kInvalidArgument, "unknown backend kind '" + kind + "'");
  }

  Vocab vocab_from(const std::string& spec) {
    if (spec == "builtin") return desk().model->vocab();
    if (spec.rfind("model:", 0) == 0) return lm::load_model(spec.substr(6)).vocab();
    if (spec.rfind("logits:", 0) == 0) return LogitsStoreBackend(spec.substr(7)).vocab();
    throw Error(ErrorCode::kInvalidArgument, "bad vocabulary spec '" + spec + "'");
  }

  std::shared_ptr<const lm::NgramModel> perturbation_model(const BackendPtr& scoring) {
    if (!opt_.perturb_model.empty()) {
      if (opt_.perturb_model == "builtin") return desk().model;
      const std::string path = opt_.perturb_model.rfind("model:", 0) == 0 ? opt_.perturb_model.substr(6) : opt_.perturb_model;
      return std::make_shared<const lm::NgramModel>(lm::load_model(path));
    }
    if (auto local = std::dynamic_pointer_cast<LocalModelBackend>(scoring)) return local->model_ptr();
    return desk().model;
  }

  std::vector<Passage> human_corpus(const Vocab& vocab) {
    if (opt_.corpus == "builtin") {
      if (vocab == desk().model->vocab()) return desk().human;
      std::vector<Passage> out;
      for (const auto& p : desk().human) out.push_back(lm::tokenize(p.raw_text, vocab, Label::kHuman));
      return out;
    }
    std::vector<Passage> out;
    for (const auto& doc : read_corpus(opt_.corpus)) out.push_back(lm::tokenize(doc, vocab, Label::kHuman));
    return out;
  }

  std::vector<std::string> training_texts() {
    if (opt_.corpus == "builtin") return desk().train_texts;
    return read_corpus(opt_.corpus);
  }

  /// Documents separated by blank lines.
  static std::vector<std::string> read_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open corpus " + path);
    std::vector<std::string> docs;
    std::string line;
    std::string cur;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) {
        if (!cur.empty()) docs.push_back(std::move(cur));
        cur.clear();
      } else {
        if (!cur.empty()) cur.push_back(' ');
        cur += line;
      }
    }
    if (!cur.empty()) docs.push_back(std::move(cur));
    if (docs.empty()) throw Error(ErrorCode::kEmptyInput, "corpus " + path + " has no documents");
    return docs;
  }

 private:
  const Options& opt_;
  std::optional<DeskSetup> desk_;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

lm::DecodingConfig decoding_of(const Options& opt, const std::string& fallback) {
  const std::string spec = opt.decoding.empty() ? fallback : opt.decoding;
  return lm::DecodingConfig::parse(spec, opt.seed);
}

/// Detector names: fast_curvature, fast_curvature_sampling,
/// fast_curvature_raw, likelihood, entropy, logrank, lrr, detectgpt,
/// detectgpt_raw, npr, dna_gpt.
DetectorEntry make_detector(const std::string& name, const Options& opt, Context& ctx, const BackendPtr& scoring,
                            const BackendPtr& sampling, const std::string& dataset_decoding) {
  DetectorEntry e;
  e.name = name;
  e.backends = {scoring};
  if (sampling != scoring) e.backends.push_back(sampling);
  DetectorConfig dc;
  dc.sample_count = opt.samples;
  dc.threshold = opt.epsilon;
  if (name == "fast_curvature" || name == "fast_curvature_sampling" || name == "fast_curvature_raw") {
    if (name == "fast_curvature_raw") dc.normalize = false;
    const Estimator est = name == "fast_curvature_sampling" ? Estimator::kSampling : Estimator::kAnalytical;
    e.detector = std::make_shared<FastCurvatureDetector>(scoring, sampling, est, dc, name);
    return e;
  }
  e.backends = {scoring};
  if (name == "likelihood" || name == "entropy" || name == "logrank" || name == "lrr") {
    e.detector = std::make_shared<DistributionDetector>(parse_detector_id(name), scoring);
    return e;
  }
  if (name == "detectgpt" || name == "detectgpt_raw" || name == "npr") {
    PerturbConfig pc;
    pc.count = opt.perturbations;
    pc.normalize = name != "detectgpt_raw";
    auto model = ctx.perturbation_model(scoring);
    auto perturb = resample_perturber(next_token_fn(model), model->vocab_size(), pc);
    const DetectorId id = name == "npr" ? DetectorId::kNpr : DetectorId::kDetectGpt;
    e.detector = std::make_shared<PerturbationDetector>(id, scoring, std::move(perturb), pc);
    return e;
  }
  if (name == "dna_gpt") {
    DnaGptConfig cfg;
    if (!dataset_decoding.empty()) cfg.decoding = lm::DecodingConfig::parse(dataset_decoding);
    BackendPtr generator = scoring;
    if (!scoring->capabilities().can_generate) {
      generator = std::make_shared<LocalModelBackend>(ctx.perturbation_model(scoring), "generator");
    }
    e.detector = std::make_shared<DnaGptDetector>(generator, scoring, cfg);
    return e;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown detector '" + name + "'");
}

void write_text(const fs::path& path, const std::string& text) { write_file_bytes(path.string(), text); }

// ---------------------------------------------------------------------------

int cmd_detect(const Options& opt) {
  Context ctx(opt);
  std::string text = opt.text;
  if (!opt.file.empty()) {
    if (opt.file == "-") {
      std::stringstream ss;
      ss << std::cin.rdbuf();
      text = ss.str();
    } else {
      text = read_file_bytes(opt.file);
    }
  }
  BackendPtr scoring = ctx.backend(opt.backend);
  BackendPtr sampling = opt.sampling_backend.empty() ? scoring : ctx.backend(opt.sampling_backend);
  const Passage passage = lm::tokenize(text, scoring->vocab());

  std::ostringstream os;
  os << std::setprecision(6) << std::fixed;
  bool machine = false;
  if (opt.detector == "fast_curvature") {
    DetectorConfig dc;
    dc.sample_count = opt.samples;
    dc.seed = opt.seed;
    dc.threshold = opt.epsilon;
    const Estimator est = opt.estimator == "sampling" ? Estimator::kSampling : Estimator::kAnalytical;
    if (opt.estimator != "sampling" && opt.estimator != "analytical") {
      throw Error(ErrorCode::kInvalidArgument, "estimator must be analytical or sampling");
    }
    FastCurvatureDetector det(scoring, sampling, est, dc);
    const CurvatureReport r = det.report(passage, opt.seed);
    machine = classify(r, opt.epsilon);
    os << "detector=fast_curvature score=" << r.score << " verdict=" << (machine ? "machine" : "human")
       << " epsilon=" << opt.epsilon << " log_p=" << r.cond_logprob << " mu=" << r.mu_tilde
       << " sigma=" << r.sigma_tilde << " tokens=" << passage.size();
    if (r.degenerate) os << " degenerate=1";
  } else {
    const DetectorEntry e = make_detector(opt.detector, opt, ctx, scoring, sampling, "");
    const DetectorScore s = e.detector->score(passage, opt.seed);
    machine = s.value > opt.epsilon;
    os << "detector=" << opt.detector << " score=" << s.value << " verdict=" << (machine ? "machine" : "human")
       << " epsilon=" << opt.epsilon << " tokens=" << passage.size();
  }
  if (passage.meta.contains("unk_count") && passage.meta.at("unk_count") != "0") {
    os << " unknown_tokens=" << passage.meta.at("unk_count");
  }
  std::cout << os.str() << '\n';
  return machine ? kExitMachine : kExitHuman;
}

PairedDataset load_or_build_dataset(const Options& opt, Context& ctx, const BackendPtr& source,
                                    const std::string& default_decoding) {
  if (!opt.dataset.empty()) return parse_dataset_jsonl(read_file_bytes(opt.dataset), source->vocab());
  return build_dataset(ctx.human_corpus(source->vocab()), *source, opt.n, opt.prefix_tokens,
                       decoding_of(opt, default_decoding));
}

int cmd_make_dataset(const Options& opt) {
  if (opt.out.empty()) throw Error(ErrorCode::kInvalidArgument, "--out is required");
  Context ctx(opt);
  BackendPtr source = ctx.backend(opt.backend);
  const PairedDataset ds = build_dataset(ctx.human_corpus(source->vocab()), *source, opt.n ? opt.n : 200, opt.prefix_tokens,
                                         decoding_of(opt, desk_decoding().describe()));
  write_text(opt.out, dataset_jsonl(ds));
  std::cout << "wrote " << 2 * ds.size() << " passages (" << ds.size() << " pairs, decoding " << ds.decoding
            << ") to " << opt.out << '\n';
  return 0;
}

struct RunOutput {
  PairedDataset ds;
  BenchReport report;
  ReportOptions ropt;
};

RunOutput run_eval(const Options& opt, const std::string& default_detectors) {
  Context ctx(opt);
  BackendPtr scoring = ctx.backend(opt.backend);
  BackendPtr sampling = opt.sampling_backend.empty() ? scoring : ctx.backend(opt.sampling_backend);
  RunOutput out;
  out.ds = load_or_build_dataset(opt, ctx, scoring, desk_decoding().describe());
  if (opt.truncate_words > 0) out.ds = truncate_dataset(out.ds, scoring->vocab(), opt.truncate_words);
  if (!opt.attack.empty()) {
    if (opt.attack != "decoherence") throw Error(ErrorCode::kInvalidArgument, "unknown attack '" + opt.attack + "'");
    out.ds = attack_dataset(out.ds, scoring->vocab(), derive_seed(opt.seed, {0x41u}));
  }
  const auto names = split_list(opt.detectors.empty() ? default_detectors : opt.detectors);
  if (names.empty()) throw Error(ErrorCode::kInvalidArgument, "no detectors selected");
  std::vector<DetectorEntry> entries;
  for (const auto& name : names) entries.push_back(make_detector(name, opt, ctx, scoring, sampling, out.ds.decoding));
  out.ropt.epsilon = opt.epsilon;
  if (!opt.baseline.empty()) {
    if (std::find(names.begin(), names.end(), opt.baseline) == names.end()) {
      throw Error(ErrorCode::kInvalidArgument, "baseline '" + opt.baseline + "' is not among the detectors");
    }
    out.ropt.baseline = opt.baseline;
  }
  BenchOptions bopt;
  bopt.seed = opt.seed;
  bopt.threads = opt.threads;
  out.report = run_benchmark(out.ds, entries, bopt);
  return out;
}

void write_reports(const RunOutput& run, const fs::path& dir, const std::string& json_name,
                   const nlohmann::json* extra_timing = nullptr) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string());
  nlohmann::json j = report_json(run.ds, run.report, run.ropt);
  if (extra_timing) j["timing"].update(*extra_timing);
  write_text(dir / json_name, j.dump(2) + "\n");
  write_text(dir / "summary.csv", summary_csv(run.report, run.ropt));
  for (const auto& r : run.report.results) {
    if (r.roc) write_text(dir / ("roc_" + r.name + ".csv"), roc_csv(*r.roc));
  }
}

int cmd_evaluate(const Options& options) {
  Options opt = options;
  if (opt.n == 0) opt.n = 200;
  const RunOutput run = run_eval(opt, "fast_curvature,likelihood,entropy,logrank,lrr");
  std::cout << report_table(run.report, run.ropt);
  for (const auto& r : run.report.results) {
    if (!r.failures.empty()) std::cout << r.name << ": " << r.failures.size() << " item(s) failed\n";
  }
  if (!opt.out.empty()) {
    write_reports(run, opt.out, "report.json");
    std::cout << "reports written to " << opt.out << '\n';
  }
  return 0;
}

int cmd_benchmark(const Options& opt) {
  Options o = opt;
  if (o.n == 0) o.n = 50;
  if (o.baseline.empty() && o.detectors.empty()) o.baseline = "detectgpt";
  const RunOutput run = run_eval(o, "fast_curvature,detectgpt");
  std::cout << report_table(run.report, run.ropt);
  nlohmann::json speed = nlohmann::json::object();
  const DetectorResult* fast = nullptr;
  for (const auto& r : run.report.results) {
    if (r.id == DetectorId::kFastCurvature && !fast) fast = &r;
  }
  if (fast) {
    for (const auto& r : run.report.results) {
      if (&r == fast || fast->calls_used == 0 || fast->wall_seconds <= 0.0) continue;
      const double call_ratio = static_cast<double>(r.calls_used) / static_cast<double>(fast->calls_used);
      const double time_ratio = r.wall_seconds / fast->wall_seconds;
      std::cout << std::fixed << std::setprecision(2) << "speedup of " << fast->name << " over " << r.name
                << ": calls " << call_ratio << "x, wall-clock " << time_ratio << "x\n";
      speed[r.name] = {{"call_ratio", call_ratio}, {"wall_clock_ratio", time_ratio}};
    }
  }
  if (!opt.out.empty()) {
    const nlohmann::json extra = {{"speedup", speed}};
    write_reports(run, opt.out, "bench.json", &extra);
    std::cout << "reports written to " << opt.out << '\n';
  }
  return 0;
}

int cmd_train_lm(const Options& opt) {
  if (opt.out.empty()) throw Error(ErrorCode::kInvalidArgument, "--out is required");
  Context ctx(opt);
  lm::NgramParams params;
  params.order = opt.order;
  params.alpha = opt.alpha;
  if (!opt.lambdas.empty()) {
    params.lambdas = opt.lambdas;
  } else if (opt.order != 3) {
    params.lambdas.assign(static_cast<std::size_t>(opt.order), 1.0 / opt.order);
  }
  const auto texts = ctx.training_texts();
  const lm::NgramModel model = lm::train_on_text(texts, params, opt.vocab_cap);
  lm::save_model(model, opt.out);
  std::cout << "trained order-" << model.order() << " model on " << model.token_count() << " tokens, vocabulary "
            << model.vocab_size() << ", saved to " << opt.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"fastcurv: zero-shot machine-text detection by conditional probability curvature"};
  app.require_subcommand(1);

  auto add_backend = [&](CLI::App* c) {
    c->add_option("--backend", opt.backend, "builtin | model:PATH | logits:PATH | remote:CONFIG.json")
        ->capture_default_str();
    c->add_option("--sampling-backend", opt.sampling_backend, "separate sampling model (black-box setting)");
    c->add_option("--vocab-from", opt.vocab_from, "vocabulary for remote backends: builtin | model:PATH")
        ->capture_default_str();
    c->add_option("--auth-env", opt.auth_env, "environment variable holding the remote bearer token");
    c->add_option("--seed", opt.seed, "base seed")->capture_default_str();
  };
  auto add_dataset = [&](CLI::App* c) {
    c->add_option("--corpus", opt.corpus, "builtin | PATH (documents separated by blank lines)")->capture_default_str();
    c->add_option("--n", opt.n, "number of human/machine pairs (default 200; benchmark 50)");
    c->add_option("--prefix-tokens", opt.prefix_tokens, "shared prefix length")->capture_default_str();
    c->add_option("--decoding", opt.decoding, "e.g. k=40, p=0.96, T=0.8, pure (default p=0.96)");
  };
  auto add_eval = [&](CLI::App* c) {
    add_backend(c);
    add_dataset(c);
    c->add_option("--dataset", opt.dataset, "dataset JSON Lines file (otherwise built from --corpus)");
    c->add_option("--detectors", opt.detectors, "comma-separated detector names");
    c->add_option("--attack", opt.attack, "decoherence");
    c->add_option("--truncate-words", opt.truncate_words, "truncate passages to this many words");
    c->add_option("--epsilon", opt.epsilon, "decision threshold")->capture_default_str();
    c->add_option("--baseline", opt.baseline, "detector for the relative improvement column");
    c->add_option("--perturbations", opt.perturbations, "perturbations for detectgpt/npr")->capture_default_str();
    c->add_option("--samples", opt.samples, "samples for fast_curvature_sampling")->capture_default_str();
    c->add_option("--perturb-model", opt.perturb_model, "model for perturbations: builtin | model:PATH");
    c->add_option("--threads", opt.threads, "items scored concurrently")->capture_default_str();
    c->add_option("--out", opt.out, "output directory");
  };

  auto* detect = app.add_subcommand("detect", "score one passage");
  add_backend(detect);
  detect->add_option("text", opt.text, "passage text");
  detect->add_option("--file", opt.file, "read the passage from a file ('-' for stdin)");
  detect->add_option("--detector", opt.detector, "detector name")->capture_default_str();
  detect->add_option("--estimator", opt.estimator, "analytical | sampling")->capture_default_str();
  detect->add_option("--samples", opt.samples, "samples for the sampling estimator")->capture_default_str();
  detect->add_option("--epsilon", opt.epsilon, "decision threshold")->capture_default_str();
  detect->add_option("--perturbations", opt.perturbations, "perturbations for detectgpt/npr")->capture_default_str();
  detect->add_option("--perturb-model", opt.perturb_model, "model for perturbations: builtin | model:PATH");

  auto* make = app.add_subcommand("make-dataset", "build paired human/machine passages");
  add_backend(make);
  add_dataset(make);
  make->add_option("--out", opt.out, "output JSON Lines file")->required();

  auto* evaluate = app.add_subcommand("evaluate", "run detectors over a dataset");
  add_eval(evaluate);

  auto* bench = app.add_subcommand("benchmark", "compare detectors by time and model calls");
  add_eval(bench);

  auto* train = app.add_subcommand("train-lm", "train an n-gram model");
  train->add_option("--corpus", opt.corpus, "builtin | PATH")->capture_default_str();
  train->add_option("--order", opt.order, "n-gram order")->capture_default_str();
  train->add_option("--alpha", opt.alpha, "additive smoothing")->capture_default_str();
  train->add_option("--lambdas", opt.lambdas, "interpolation weights, unigram first")->delimiter(',');
  train->add_option("--vocab-cap", opt.vocab_cap, "vocabulary size cap")->capture_default_str();
  train->add_option("--out", opt.out, "model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    if (*detect) {
      if (opt.text.empty() && opt.file.empty()) throw Error(ErrorCode::kEmptyInput, "no passage given");
      return cmd_detect(opt);
    }
    if (*make) return cmd_make_dataset(opt);
    if (*evaluate) return cmd_evaluate(opt);
    if (*bench) return cmd_benchmark(opt);
    if (*train) return cmd_train_lm(opt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
