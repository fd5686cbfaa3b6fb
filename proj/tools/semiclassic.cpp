#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "semiclassic/cli.hpp"

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw semiclassic::IoError("cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw semiclassic::IoError("read failed for config file " + path);
  return buf.str();
}

struct CommonArgs {
  std::string config;
  std::string out;
  std::string format;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semiclassical stationary-phase partition toolkit"};
  app.require_subcommand(1);
  CommonArgs args;
  const char* kCommands[] = {"classify",  "determinant",   "eta",       "spectral_flow",
                             "lefschetz", "mapping_torus", "witten_sum"};
  for (const char* name : kCommands) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " command");
    sub->add_option("--config", args.config, "path to a JSON config document")->required();
    sub->add_option("--out", args.out, "output path (\"-\" for stdout)");
    sub->add_option("--format", args.format, "output format: json or csv");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string subname = app.get_subcommands().front()->get_name();

  semiclassic::json echo = nullptr;
  semiclassic::OutputSpec output;  // fallback for error reports before parsing
  try {
    const std::string text = read_text_file(args.config);
    semiclassic::RunConfig cfg = semiclassic::parse_config(text);
    if (std::string(semiclassic::to_string(cfg.command)) != subname) {
      throw semiclassic::ConfigError("config names command \"" +
                                     std::string(semiclassic::to_string(cfg.command)) +
                                     "\" but the CLI invoked \"" + subname + "\"");
    }
    if (!args.out.empty()) cfg.output.path = args.out;
    if (!args.format.empty()) {
      if (args.format == "json") {
        cfg.output.format = semiclassic::OutputFormat::Json;
      } else if (args.format == "csv") {
        cfg.output.format = semiclassic::OutputFormat::Csv;
      } else {
        throw semiclassic::ConfigError("unknown --format value \"" + args.format + "\"");
      }
    }
    output = cfg.output;
    echo = semiclassic::detail::echo_config(cfg);
    const semiclassic::Report report = semiclassic::run(cfg);
    semiclassic::emit_report(report, cfg.output, cfg.command);
    return 0;
  } catch (const std::exception& e) {
    const int code = semiclassic::exit_code_for_error(e);
    const semiclassic::Report report =
        semiclassic::make_error_report(echo, semiclassic::error_class_name(e), e.what());
    try {
      // Error reports are always JSON so the diagnostics survive verbatim.
      semiclassic::OutputSpec spec = output;
      spec.format = semiclassic::OutputFormat::Json;
      semiclassic::emit_report(report, spec, semiclassic::Command::Classify);
    } catch (const std::exception&) {
      std::cerr << semiclassic::error_class_name(e) << ": " << e.what() << "\n";
      return 6;
    }
    std::cerr << semiclassic::error_class_name(e) << ": " << e.what() << "\n";
    return code;
  }
}
