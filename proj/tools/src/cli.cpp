#include "efcn_cli/cli.hpp"

#include <exception>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "efcn/error.hpp"

namespace efcn::cli {

namespace {

void report(std::ostream& err, const std::string& kind, int code, const std::string& message) {
  nlohmann::json line{{"error", kind}, {"code", code}, {"message", message}};
  err << line.dump() << '\n';
}

void add_eval_options(CLI::App* sub, EvalArgs& a) {
  sub->add_option("--model", a.model, "Model checkpoint");
  sub->add_option("--predictions", a.predictions, "Directory written by predict");
  sub->add_option("--data", a.data, "Dataset directory")->required();
  sub->add_option("--split", a.split, "train, val or test")->capture_default_str();
  sub->add_option("--config", a.config, "Run configuration (utility matrix, bins, gamma grid)");
  sub->add_option("--gamma", a.gamma, "Imprecision tolerance degree");
  sub->add_option("--bins", a.bins, "Calibration bin count");
  sub->add_option("--out", a.out, "Output CSV (default: stdout)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evidential fully convolutional segmentation"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset");
  s->add_option("--config", synth.config, "Run configuration");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Override the generator seed");
  s->add_option("--boundary-width", synth.boundary_width, "Override the soft boundary width");
  s->add_flag("--unknown", synth.unknown, "Add a held-out class to test images");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--config", train.config, "Run configuration");
  t->add_option("--data", train.data, "Dataset directory")->required();
  t->add_option("--out", train.out, "Checkpoint path")->required();
  t->add_option("--history", train.history, "History CSV path");
  t->add_option("--epochs", train.epochs, "Override epoch count");
  t->add_option("--lr", train.learning_rate, "Override learning rate");
  t->add_flag("--quiet", train.quiet, "No per-epoch output");

  PredictArgs predict;
  auto* p = app.add_subcommand("predict", "Write assigned sets, BetP maps and PPM overlays");
  p->add_option("--model", predict.model, "Model checkpoint")->required();
  p->add_option("--data", predict.data, "Dataset directory")->required();
  p->add_option("--out", predict.out, "Output directory")->required();
  p->add_option("--split", predict.split, "train, val or test")->capture_default_str();
  p->add_option("--config", predict.config, "Run configuration (utility matrix)");
  p->add_option("--gamma", predict.gamma, "Imprecision tolerance degree");

  EvalArgs evaluate;
  auto* e = app.add_subcommand("evaluate", "PU, UIoU, ECE and calibration bins as CSV");
  add_eval_options(e, evaluate);
  e->add_option("--gamma-sweep", evaluate.sweep, "start:step:stop (default 0.5:0.05:1.0)")->expected(0, 1);

  EvalArgs calibrate;
  auto* c = app.add_subcommand("calibrate", "Reliability diagram data as CSV");
  add_eval_options(c, calibrate);

  OwaArgs owa;
  auto* o = app.add_subcommand("owa", "OWA weights and extended utility tables");
  o->add_option("--gamma", owa.gamma, "Imprecision tolerance degree")->capture_default_str();
  o->add_option("--m", owa.m, "Number of classes")->capture_default_str();
  o->add_option("--acts", owa.acts, "singletons, pairs, triples, omega or a+b sets")->capture_default_str();
  o->add_option("--soft-labels", owa.soft_labels, "Soft-label columns, same syntax as --acts");
  o->add_option("--names", owa.names, "Comma-separated class names (default w1..wM)");

  GradcheckArgs grad;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference gradient report");
  g->add_option("--config", grad.config, "Run configuration");
  g->add_option("--model", grad.model, "Model checkpoint");
  g->add_option("--size", grad.size, "Image side length")->capture_default_str();
  g->add_option("--params", grad.parameters, "Parameters to check")->capture_default_str();
  g->add_option("--seed", grad.seed, "Sampling seed")->capture_default_str();
  g->add_option("--step", grad.step, "Finite-difference step")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& ex) {
    report(err, std::string(to_string(ErrorKind::InvalidArgument)), exit_code(ErrorKind::InvalidArgument), ex.what());
    return exit_code(ErrorKind::InvalidArgument);
  }

  try {
    if (*s) cmd_synth(synth, out);
    else if (*t) cmd_train(train, out);
    else if (*p) cmd_predict(predict, out);
    else if (*e) cmd_evaluate(evaluate, out);
    else if (*c) cmd_calibrate(calibrate, out);
    else if (*o) cmd_owa(owa, out);
    else if (*g) cmd_gradcheck(grad, out);
  } catch (const Error& ex) {
    report(err, std::string(to_string(ex.kind())), exit_code(ex.kind()), ex.what());
    return exit_code(ex.kind());
  } catch (const std::exception& ex) {
    report(err, "internal", 70, ex.what());
    return 70;
  }
  return 0;
}

}  // namespace efcn::cli
