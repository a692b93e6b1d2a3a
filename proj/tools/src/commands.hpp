#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace efcn::cli {

struct SynthArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> boundary_width;
  bool unknown = false;
};

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string history;
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;
  bool quiet = false;
};

struct PredictArgs {
  std::string model;
  std::string data;
  std::string out;
  std::string split = "test";
  std::string config;
  std::optional<double> gamma;
};

// Source of BetP maps for evaluate/calibrate: a checkpoint or a predict
// output directory.
struct EvalArgs {
  std::string model;
  std::string predictions;
  std::string data;
  std::string split = "test";
  std::string config;
  std::optional<double> gamma;
  std::optional<std::string> sweep;  // empty string: default grid
  std::optional<std::size_t> bins;
  std::string out;
};

struct OwaArgs {
  double gamma = 0.8;
  std::size_t m = 3;
  std::string acts = "singletons,pairs,omega";
  std::string soft_labels;
  std::string names;
};

struct GradcheckArgs {
  std::string config;
  std::string model;
  std::size_t size = 8;
  std::size_t parameters = 200;
  std::uint64_t seed = 0;
  double step = 1e-5;
};

void cmd_synth(const SynthArgs& a, std::ostream& out);
void cmd_train(const TrainArgs& a, std::ostream& out);
void cmd_predict(const PredictArgs& a, std::ostream& out);
void cmd_evaluate(const EvalArgs& a, std::ostream& out);
void cmd_calibrate(const EvalArgs& a, std::ostream& out);
void cmd_owa(const OwaArgs& a, std::ostream& out);
void cmd_gradcheck(const GradcheckArgs& a, std::ostream& out);

}  // namespace efcn::cli
