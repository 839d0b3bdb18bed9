#include "cli.hpp"

int main(int argc, char** argv) {
  capax::cli::RunConfig config;
  CLI::App app;
  capax::cli::setup(app, config);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: bad arguments: " << e.what() << "\n";
    return 1;
  }
  return capax::cli::run(config);
}
