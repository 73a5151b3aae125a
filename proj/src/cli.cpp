#include "peqa/cli.hpp"

#include <algorithm>
#include <iostream>
#include <optional>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "peqa/ablation.hpp"
#include "peqa/adapter.hpp"
#include "peqa/dataset.hpp"
#include "peqa/error.hpp"
#include "peqa/input_assembly.hpp"
#include "peqa/io.hpp"
#include "peqa/linearizer.hpp"
#include "peqa/metrics.hpp"
#include "peqa/table_json.hpp"
#include "peqa/text_util.hpp"
#include "peqa/trainer.hpp"

namespace peqa::cli {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kGradCheckTolerance = 1e-4;

struct GlobalOptions {
  std::uint64_t seed = 6;
  std::string precision = "double";
};

nlohmann::json ParseJsonFile(const std::string& path) {
  const std::string text = ReadFile(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kSchemaError, path + ": " + e.what());
  }
}

// Writes `text` to `path`, or to `out` when no path was given.
void Emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    WriteFile(path, text);
  }
}

std::string JsonLine(const ordered_json& j) { return DumpJson(j) + "\n"; }

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIoError:
    case ErrorKind::kDivergence:
      return kExitInternal;
    default:
      return kExitValidation;
  }
}

void ReportError(std::ostream& err, std::string_view kind, const std::string& message) {
  err << DumpJson(ordered_json{{"error", kind}, {"message", message}}) << "\n";
}

ordered_json FreezeSummary(const FreezeReport& report, const ToyConfig& config) {
  const AdapterCount expected =
      CountAdapterParams(config.dims(report.frozen_total), config.active_adapters());
  return {{"trainable", report.trainable_total},
          {"frozen", report.frozen_total},
          {"trainable_percent", report.trainable_percent},
          {"count_adapter_params", expected.count},
          {"consistent", expected.count == report.trainable_total}};
}

template <typename Real>
ordered_json RunTraining(const ToyConfig& config, const std::vector<Sample>& data,
                         const TrainHyper& hyper) {
  ToyModel<Real> model = ToyModel<Real>::Build(config);
  const FreezeReport report = model.Report();
  TrainLog log = TrainAdapters(model, data, hyper);
  ordered_json j = TrainLogToJson(log);
  j["freeze"] = FreezeSummary(report, config);
  return j;
}

}  // namespace

ToyConfig ToyConfigFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kSchemaError, "toy config must be an object");
  ToyConfig config;
  auto read_int = [&j](const char* key, int& field) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_number_integer()) {
      throw Error(ErrorKind::kSchemaError, std::string("'") + key + "' must be an integer");
    }
    field = it->get<int>();
  };
  read_int("vocab_size", config.vocab_size);
  read_int("d_model", config.d_model);
  read_int("n_heads", config.n_heads);
  read_int("d_ff", config.d_ff);
  read_int("n_encoder_layers", config.n_encoder_layers);
  read_int("n_decoder_layers", config.n_decoder_layers);
  read_int("bottleneck", config.bottleneck);
  read_int("max_seq_len", config.max_seq_len);
  if (auto it = j.find("activation"); it != j.end()) {
    if (!it->is_string()) throw Error(ErrorKind::kSchemaError, "'activation' must be a string");
    config.adapter_activation = ParseActivation(it->get<std::string>());
  }
  if (auto it = j.find("adapters"); it != j.end()) {
    if (!it->is_array()) throw Error(ErrorKind::kSchemaError, "'adapters' must be an array");
    std::vector<int> layers;
    for (const auto& v : *it) {
      if (!v.is_number_integer()) {
        throw Error(ErrorKind::kSchemaError, "'adapters' must hold integers");
      }
      layers.push_back(v.get<int>());
    }
    config.adapters = AdapterSet::FromIndices(config.n_encoder_layers,
                                              config.n_decoder_layers, layers);
  }
  config.Validate();
  return config;
}

int Dispatch(std::span<const std::string> args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Table/text linearization, adapter accounting and QA metrics"};
  app.name("peqa");
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Random seed")->capture_default_str();
  app.add_option("--precision", global.precision, "Toy model precision")
      ->check(CLI::IsMember({"single", "double"}))
      ->capture_default_str();

  std::function<void()> action;

  // linearize
  std::string lin_in, lin_out;
  auto* linearize = app.add_subcommand("linearize", "Flatten a table JSON to key: value text");
  linearize->add_option("--in", lin_in, "Table JSON")->required();
  linearize->add_option("--out", lin_out, "Output text file");
  linearize->callback([&] {
    action = [&] {
      const auto flat = Linearize(TableFromJson(ParseJsonFile(lin_in)));
      Emit(lin_out, flat.text + "\n", out);
      err << "linearized " << flat.pair_count << " key-value pairs\n";
    };
  });

  // assemble
  std::string asm_question, asm_title, asm_context_file, asm_batch, asm_out;
  std::optional<std::size_t> asm_max_tokens;
  auto* assemble = app.add_subcommand("assemble", "Build the prompted model input");
  assemble->add_option("--question", asm_question);
  assemble->add_option("--title", asm_title);
  assemble->add_option("--context-file", asm_context_file);
  assemble->add_option("--batch", asm_batch,
                       "JSONL with question/title/context per line");
  assemble->add_option("--max-tokens", asm_max_tokens);
  assemble->add_option("--out", asm_out);
  assemble->callback([&] {
    action = [&] {
      auto build = [&](const std::string& q, const std::string& t, const std::string& c) {
        InputSequence seq = Assemble(q, t, c);
        if (asm_max_tokens) seq = Truncate(seq, *asm_max_tokens);
        return JsonLine({{"input", seq.rendered()}, {"tokens", seq.token_count()}});
      };
      std::string text;
      if (!asm_batch.empty()) {
        const auto lines = ReadLines(asm_batch);
        for (std::size_t i = 0; i < lines.size(); ++i) {
          if (SplitWhitespace(lines[i]).empty()) continue;
          nlohmann::json j;
          try {
            j = nlohmann::json::parse(lines[i]);
          } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::kSchemaError,
                        "line " + std::to_string(i + 1) + ": " + e.what());
          }
          auto field = [&](const char* key) -> std::string {
            auto it = j.find(key);
            if (it == j.end()) return {};
            if (!it->is_string()) {
              throw Error(ErrorKind::kSchemaError, "line " + std::to_string(i + 1) +
                                                       ": '" + key + "' must be a string");
            }
            return it->get<std::string>();
          };
          text += build(field("question"), field("title"), field("context"));
        }
      } else {
        const std::string context =
            asm_context_file.empty() ? std::string() : ReadFile(asm_context_file);
        text = build(asm_question, asm_title, context);
      }
      Emit(asm_out, text, out);
    };
  });

  // eval
  std::string eval_pred, eval_ref, eval_out;
  int eval_jobs = 1;
  auto* eval = app.add_subcommand("eval", "ROUGE-1/2/L and corpus sacreBLEU");
  eval->add_option("--pred", eval_pred)->required();
  eval->add_option("--ref", eval_ref)->required();
  eval->add_option("--out", eval_out);
  eval->add_option("--jobs", eval_jobs)->check(CLI::PositiveNumber);
  eval->callback([&] {
    action = [&] {
      const auto report = metrics::EvaluatePredictions(eval_pred, eval_ref, eval_jobs);
      Emit(eval_out, JsonLine(metrics::ReportToJson(report)), out);
      err << "n=" << report.n_examples << " rouge2.f=" << report.rouge2.f1
          << " rougeL.f=" << report.rougeL.f1 << " bleu=" << report.bleu << "\n";
    };
  });

  // count-params
  std::string cp_config, cp_ablation, cp_out;
  auto* count = app.add_subcommand("count-params", "Trainable adapter parameter count");
  count->add_option("--config", cp_config, "Model dims JSON (default: BART-large)");
  count->add_option("--ablation", cp_ablation, "Ablation JSON");
  count->add_option("--out", cp_out);
  count->callback([&] {
    action = [&] {
      const ModelDims dims =
          cp_config.empty() ? ReferenceDims() : DimsFromJson(ParseJsonFile(cp_config));
      AblationConfig ablation;
      if (!cp_ablation.empty()) ablation = AblationFromJson(ParseJsonFile(cp_ablation));
      const AdapterSet set = ApplyAblation(
          AdapterSet::Full(dims.n_encoder_layers, dims.n_decoder_layers), ablation);
      const AdapterCount c = CountAdapterParams(dims, set);
      Emit(cp_out,
           JsonLine({{"label", ablation.label()},
                     {"trainable", c.count},
                     {"percent", c.percent},
                     {"trainable_formatted", WithThousandsSeparators(c.count)}}),
           out);
      char percent[32];
      std::snprintf(percent, sizeof(percent), "%.2f", c.percent);
      err << WithThousandsSeparators(c.count) << " (" << percent << "%)\n";
    };
  });

  // plan-ablation
  std::string plan_mode, plan_dims, plan_out;
  auto* plan = app.add_subcommand("plan-ablation", "Enumerate and cost adapter ablations");
  plan->add_option("--mode", plan_mode)->required()->check(CLI::IsMember({"uniform", "grid"}));
  plan->add_option("--dims", plan_dims, "Model dims JSON (default: BART-large)");
  plan->add_option("--out", plan_out);
  plan->callback([&] {
    action = [&] {
      const ModelDims dims =
          plan_dims.empty() ? ReferenceDims() : DimsFromJson(ParseJsonFile(plan_dims));
      const auto configs =
          plan_mode == "uniform" ? UniformAblationPlan(dims) : GridAblationPlan(dims);
      Emit(plan_out, ManifestJsonl(CostPlan(configs, dims)), out);
      err << configs.size() << " " << plan_mode << " ablation configs\n";
    };
  });

  // gradcheck
  std::string gc_config, gc_out;
  double gc_eps = 1e-5;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of adapter gradients");
  gradcheck->add_option("--config", gc_config, "Toy model JSON");
  gradcheck->add_option("--eps", gc_eps)->check(CLI::PositiveNumber);
  gradcheck->add_option("--out", gc_out);
  gradcheck->callback([&] {
    action = [&] {
      if (global.precision != "double") {
        throw Error(ErrorKind::kInvalidConfig, "gradcheck runs in double precision only");
      }
      ToyConfig config = gc_config.empty() ? ToyConfig{} : ToyConfigFromJson(ParseJsonFile(gc_config));
      config.seed = global.seed;
      const GradCheckReport r = CheckAdapterGradients(config, gc_eps);
      const bool passed = r.max_relative_error < kGradCheckTolerance &&
                          r.max_frozen_gradient == 0.0;
      Emit(gc_out,
           JsonLine({{"max_relative_error", r.max_relative_error},
                     {"worst_tensor", r.worst_tensor},
                     {"worst_analytic", r.worst_analytic},
                     {"worst_numeric", r.worst_numeric},
                     {"checked", r.checked},
                     {"max_frozen_gradient", r.max_frozen_gradient},
                     {"eps", r.eps},
                     {"tolerance", kGradCheckTolerance},
                     {"passed", passed}}),
           out);
      err << "gradcheck " << (passed ? "passed" : "FAILED") << ": max rel error "
          << r.max_relative_error << " over " << r.checked << " parameters\n";
    };
  });

  // train-toy
  std::string tt_task = "copy", tt_config, tt_out, tt_optimizer = "adam";
  TrainHyper hyper;
  int tt_examples = 32, tt_length = 6;
  auto* train = app.add_subcommand("train-toy", "Adapter-only training on a synthetic task");
  train->add_option("--task", tt_task)->check(CLI::IsMember({"copy"}));
  train->add_option("--config", tt_config, "Toy model JSON");
  train->add_option("--steps", hyper.steps)->check(CLI::NonNegativeNumber);
  train->add_option("--lr", hyper.learning_rate)->check(CLI::NonNegativeNumber);
  train->add_option("--batch-size", hyper.batch_size)->check(CLI::PositiveNumber);
  train->add_option("--optimizer", tt_optimizer)->check(CLI::IsMember({"adam", "sgd"}));
  train->add_option("--examples", tt_examples)->check(CLI::PositiveNumber);
  train->add_option("--length", tt_length)->check(CLI::PositiveNumber);
  train->add_option("--out", tt_out);
  train->callback([&] {
    action = [&] {
      ToyConfig config = tt_config.empty() ? ToyConfig{} : ToyConfigFromJson(ParseJsonFile(tt_config));
      config.seed = global.seed;
      hyper.optimizer = tt_optimizer == "sgd" ? Optimizer::kSgd : Optimizer::kAdam;
      const auto data = MakeCopyTask(tt_examples, tt_length, config.vocab_size, global.seed + 1);
      ordered_json log = global.precision == "single"
                             ? RunTraining<float>(config, data, hyper)
                             : RunTraining<double>(config, data, hyper);
      Emit(tt_out, JsonLine(log), out);
      err << "loss " << log["initial_loss"].get<double>() << " -> "
          << log["final_loss"].get<double>() << " after " << hyper.steps << " steps\n";
    };
  });

  // stats
  std::string st_in, st_modality, st_out;
  auto* stats = app.add_subcommand("stats", "Dataset statistics per split");
  stats->add_option("--in", st_in)->required();
  stats->add_option("--modality", st_modality)->required()->check(CLI::IsMember({"table", "text"}));
  stats->add_option("--out", st_out);
  stats->callback([&] {
    action = [&] {
      const auto records = ReadRecords(st_in, ParseModality(st_modality));
      Emit(st_out, JsonLine(StatsToJson(ComputeStats(records))), out);
      err << records.size() << " records\n";
    };
  });

  // prepare
  std::string pr_in, pr_out;
  PrepareLimits limits;
  int pr_jobs = 1;
  auto* prepare = app.add_subcommand("prepare", "Linearize, assemble and truncate records");
  prepare->add_option("--in", pr_in)->required();
  prepare->add_option("--out", pr_out);
  prepare->add_option("--max-input-tokens", limits.max_input_tokens);
  prepare->add_option("--max-target-tokens", limits.max_target_tokens);
  prepare->add_option("--answer-index", limits.answer_index);
  prepare->add_option("--jobs", pr_jobs)->check(CLI::PositiveNumber);
  prepare->callback([&] {
    action = [&] {
      const auto records = ReadRecords(pr_in, std::nullopt);
      const auto prepared = PrepareExamples(records, limits, pr_jobs);
      Emit(pr_out, PreparedJsonl(prepared), out);
      err << prepared.size() << " examples prepared\n";
    };
  });

  if (args.empty()) {
    err << app.help();
    return kExitValidation;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    const auto subcommands = app.get_subcommands({});
    const bool unknown_subcommand =
        !args.front().starts_with("-") &&
        std::none_of(subcommands.begin(), subcommands.end(),
                     [&](const CLI::App* sub) { return sub->get_name() == args.front(); });
    ReportError(err, unknown_subcommand ? ErrorKindName(ErrorKind::kUnknownSubcommand)
                                        : std::string_view("UsageError"),
                e.what());
    return kExitValidation;
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const Error& e) {
    ReportError(err, ErrorKindName(e.kind()), e.what());
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    ReportError(err, "Internal", e.what());
    return kExitInternal;
  }
}

}  // namespace peqa::cli
