#include "specseek/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>

#include "specseek/config.hpp"
#include "specseek/errors.hpp"
#include "specseek/harness.hpp"

namespace specseek::cli {

namespace {

constexpr const char* kGlobalUsage = R"(usage: specseek <command> [flags]

commands:
  train      train an agent: --config PATH --out-dir PATH [--seed N]
             [--steps N] [--mode single|double]
  eval       evaluate a checkpoint: --checkpoint PATH --config PATH
             --episodes N [--seed N]
  baseline   evaluate a fixed policy: --policy random|scripted --config PATH
             --episodes N [--seed N]
  trace      write one traced episode: --config PATH
             --policy random|scripted|greedy [--checkpoint PATH] --out PATH
             [--seed N]
  gradcheck  verify backprop against finite differences [--tolerance X]

The SPECSEEK_SEED environment variable supplies the default seed; an
explicit --seed flag wins. Use '<command> --help' for one command's flags.
)";

class UsageExit {
 public:
  explicit UsageExit(std::string msg) : msg_(std::move(msg)) {}
  const std::string& msg() const { return msg_; }

 private:
  std::string msg_;
};

class HelpExit {};

// Tiny flag parser: every flag takes one value except --help.
class Flags {
 public:
  Flags(const std::vector<std::string>& args,
        std::vector<std::string> known) : known_(std::move(known)) {
    for (size_t i = 0; i < args.size(); ++i) {
      const std::string& a = args[i];
      if (a == "--help" || a == "-h") throw HelpExit{};
      if (a.rfind("--", 0) != 0) {
        throw UsageExit("unexpected argument '" + a + "'");
      }
      bool ok = false;
      for (const std::string& k : known_) {
        if (a == k) {
          ok = true;
          break;
        }
      }
      if (!ok) throw UsageExit("unknown flag '" + a + "'");
      if (i + 1 >= args.size()) {
        throw UsageExit("flag '" + a + "' expects a value");
      }
      values_[a] = args[++i];
    }
  }

  std::optional<std::string> get(const std::string& flag) const {
    const auto it = values_.find(flag);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string require(const std::string& flag) const {
    const auto v = get(flag);
    if (!v) throw UsageExit("missing required flag '" + flag + "'");
    return *v;
  }

 private:
  std::vector<std::string> known_;
  std::map<std::string, std::string> values_;
};

long long require_int(const std::string& flag, const std::string& value) {
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0') {
    throw UsageExit("flag '" + flag + "' expects an integer, got '" + value +
                    "'");
  }
  return v;
}

uint64_t default_seed() {
  if (const char* env = std::getenv("SPECSEEK_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
      throw UsageExit(std::string("SPECSEEK_SEED is not an integer: '") + env +
                      "'");
    }
    return v;
  }
  return 1;
}

uint64_t seed_from(const Flags& flags) {
  if (const auto s = flags.get("--seed")) {
    const long long v = require_int("--seed", *s);
    if (v < 0) throw UsageExit("--seed must be >= 0");
    return static_cast<uint64_t>(v);
  }
  return default_seed();
}

void print_aggregate(std::ostream& out, const harness::EvalAggregate& agg) {
  out << harness::format_g6(agg.mean_reward) << ','
      << harness::format_g6(agg.std_reward) << ','
      << harness::format_g6(agg.mean_length) << ','
      << harness::format_g6(agg.detect_precision) << ','
      << harness::format_g6(agg.finish_accuracy) << '\n';
}

int guarded(std::ostream& err, const char* usage,
            const std::function<int()>& body) {
  try {
    return body();
  } catch (const HelpExit&) {
    err << usage;
    return 0;
  } catch (const UsageExit& u) {
    err << "error: " << u.msg() << "\n" << usage;
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

constexpr const char* kTrainUsage =
    "usage: specseek train --config PATH --out-dir PATH [--seed N]"
    " [--steps N] [--mode single|double]\n";
constexpr const char* kEvalUsage =
    "usage: specseek eval --checkpoint PATH --config PATH --episodes N"
    " [--seed N]\n";
constexpr const char* kBaselineUsage =
    "usage: specseek baseline --policy random|scripted --config PATH"
    " --episodes N [--seed N]\n";
constexpr const char* kTraceUsage =
    "usage: specseek trace --config PATH --policy random|scripted|greedy"
    " [--checkpoint PATH] --out PATH [--seed N]\n";
constexpr const char* kGradcheckUsage =
    "usage: specseek gradcheck [--tolerance X] [--seed N]\n";

}  // namespace

int cmd_train(const std::vector<std::string>& args, std::ostream& out,
              std::ostream& err) {
  return guarded(err, kTrainUsage, [&]() -> int {
    const Flags flags(args,
                      {"--config", "--out-dir", "--seed", "--steps", "--mode"});
    const std::string config_path = flags.require("--config");
    const std::string out_dir = flags.require("--out-dir");

    RunConfig cfg = parse_config(config_path);
    cfg.seed = seed_from(flags);
    cfg.out_dir = out_dir;
    if (const auto steps = flags.get("--steps")) {
      const long long v = require_int("--steps", *steps);
      if (v < 0) throw UsageExit("--steps must be >= 0");
      cfg.total_env_steps = v;
    }
    if (const auto mode = flags.get("--mode")) {
      if (*mode == "single") cfg.agent.mode = agent::QMode::Single;
      else if (*mode == "double") cfg.agent.mode = agent::QMode::Double;
      else throw UsageExit("--mode expects single or double");
    }
    cfg.validate();

    harness::TrainOptions opts;
    opts.total_env_steps = cfg.total_env_steps;
    opts.seed = cfg.seed;
    opts.out_dir = cfg.out_dir;
    const harness::TrainSummary summary =
        harness::train(cfg.env, cfg.agent, cfg.network_spec(), opts);

    out << "episodes=" << summary.episodes
        << " final100_mean_reward="
        << harness::format_g6(summary.final100_mean_reward)
        << " checkpoint=" << summary.checkpoint_path << "\n";
    return 0;
  });
}

int cmd_eval(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  return guarded(err, kEvalUsage, [&]() -> int {
    const Flags flags(args, {"--checkpoint", "--config", "--episodes",
                             "--seed"});
    const std::string ckpt = flags.require("--checkpoint");
    const std::string config_path = flags.require("--config");
    const long long episodes =
        require_int("--episodes", flags.require("--episodes"));
    if (episodes < 1) throw UsageExit("--episodes must be >= 1");

    const RunConfig cfg = parse_config(config_path);
    const harness::EvalAggregate agg = harness::evaluate_checkpoint(
        ckpt, cfg.env, static_cast<int>(episodes), seed_from(flags));
    print_aggregate(out, agg);
    return 0;
  });
}

int cmd_baseline(const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, kBaselineUsage, [&]() -> int {
    const Flags flags(args, {"--policy", "--config", "--episodes", "--seed"});
    const std::string policy_name = flags.require("--policy");
    const std::string config_path = flags.require("--config");
    const long long episodes =
        require_int("--episodes", flags.require("--episodes"));
    if (episodes < 1) throw UsageExit("--episodes must be >= 1");
    if (policy_name != "random" && policy_name != "scripted") {
      throw UsageExit("--policy expects random or scripted");
    }

    const RunConfig cfg = parse_config(config_path);
    harness::RandomPolicy random_policy;
    harness::ScriptedPolicy scripted_policy;
    harness::Policy* policy = &random_policy;
    if (policy_name == "scripted") policy = &scripted_policy;

    const harness::EvalAggregate agg = harness::evaluate(
        cfg.env, *policy, static_cast<int>(episodes), seed_from(flags));
    print_aggregate(out, agg);
    return 0;
  });
}

int cmd_trace(const std::vector<std::string>& args, std::ostream& out,
              std::ostream& err) {
  (void)out;
  return guarded(err, kTraceUsage, [&]() -> int {
    const Flags flags(args,
                      {"--config", "--policy", "--checkpoint", "--out",
                       "--seed"});
    const std::string config_path = flags.require("--config");
    const std::string policy_name = flags.require("--policy");
    const std::string out_path = flags.require("--out");
    if (policy_name != "random" && policy_name != "scripted" &&
        policy_name != "greedy") {
      throw UsageExit("--policy expects random, scripted or greedy");
    }

    const RunConfig cfg = parse_config(config_path);
    harness::RandomPolicy random_policy;
    harness::ScriptedPolicy scripted_policy;
    std::optional<nn::Checkpoint> ckpt;
    std::optional<harness::GreedyPolicy> greedy_policy;
    harness::Policy* policy = nullptr;
    if (policy_name == "random") {
      policy = &random_policy;
    } else if (policy_name == "scripted") {
      policy = &scripted_policy;
    } else if (policy_name == "greedy") {
      const auto path = flags.get("--checkpoint");
      if (!path) throw UsageExit("--policy greedy requires --checkpoint");
      ckpt = nn::load_checkpoint(*path);
      greedy_policy.emplace(ckpt->params);
      policy = &*greedy_policy;
    } else {
      throw UsageExit("--policy expects random, scripted or greedy");
    }

    std::ofstream trace(out_path, std::ios::binary | std::ios::trunc);
    if (!trace) throw IoError("cannot open for writing: " + out_path);
    Rng rng(seed_from(flags));
    harness::run_episode(cfg.env, *policy, rng, &trace);
    trace.flush();
    if (!trace) throw IoError("write failed: " + out_path);
    return 0;
  });
}

int cmd_gradcheck(const std::vector<std::string>& args, std::ostream& out,
                  std::ostream& err) {
  return guarded(err, kGradcheckUsage, [&]() -> int {
    const Flags flags(args, {"--tolerance", "--seed"});
    double tolerance = 1e-6;
    if (const auto t = flags.get("--tolerance")) {
      char* end = nullptr;
      tolerance = std::strtod(t->c_str(), &end);
      if (end == t->c_str() || *end != '\0') {
        throw UsageExit("--tolerance expects a real");
      }
    }
    Rng rng(seed_from(flags));

    bool all_pass = true;
    const auto report_one = [&](const std::string& label,
                                const nn::NetworkSpec& spec) {
      const nn::GradCheckReport rep = nn::gradcheck(spec, rng, tolerance);
      for (const nn::GradCheckLayer& l : rep.layers) {
        out << label << " " << l.name << " max_rel_err "
            << harness::format_g6(l.max_rel_err) << " ("
            << (l.max_rel_err < tolerance ? "ok" : "FAIL") << ")\n";
      }
      all_pass = all_pass && rep.pass;
    };

    nn::NetworkSpec dense_only;
    dense_only.n_bins = 12;
    dense_only.scalar_path = {{16, true}};
    dense_only.head = {{24, true}, {7, false}};
    report_one("dense-only", dense_only);

    nn::NetworkSpec conv_narrow;
    conv_narrow.n_bins = 8;
    conv_narrow.spectrum_path = {{8, 3, 1, true}};
    conv_narrow.scalar_path = {{8, true}};
    conv_narrow.head = {{16, true}, {7, false}};
    report_one("conv-w3s1", conv_narrow);

    nn::NetworkSpec conv_wide;
    conv_wide.n_bins = 32;
    conv_wide.spectrum_path = {{8, 8, 2, true}};
    conv_wide.scalar_path = {{8, true}};
    conv_wide.head = {{16, true}, {7, false}};
    report_one("conv-w8s2", conv_wide);

    report_one("default", nn::NetworkSpec::defaults(64));

    out << (all_pass ? "gradcheck PASS\n" : "gradcheck FAIL\n");
    return all_pass ? 0 : 1;
  });
}

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  if (args.empty()) {
    err << kGlobalUsage;
    return 2;
  }
  const std::string& cmd = args[0];
  const std::vector<std::string> rest(args.begin() + 1, args.end());
  if (cmd == "--help" || cmd == "-h" || cmd == "help") {
    err << kGlobalUsage;
    return 0;
  }
  if (cmd == "train") return cmd_train(rest, out, err);
  if (cmd == "eval") return cmd_eval(rest, out, err);
  if (cmd == "baseline") return cmd_baseline(rest, out, err);
  if (cmd == "trace") return cmd_trace(rest, out, err);
  if (cmd == "gradcheck") return cmd_gradcheck(rest, out, err);
  err << "error: unknown command '" << cmd << "'\n" << kGlobalUsage;
  return 2;
}

}  // namespace specseek::cli
