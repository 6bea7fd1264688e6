/**
 * Copyright 2026 The cvborn authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cvborn/commands.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitSimulation = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw cvborn::ValidationError("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

int run(cvborn::Command expected, const std::string& config_path) {
    try {
        const cvborn::RunConfig config = cvborn::parse_config(read_file(config_path));
        if (config.command != expected) {
            throw cvborn::ValidationError(
                "config command does not match the requested subcommand");
        }
        cvborn::run_config(config);
        return kExitOk;
    } catch (const cvborn::ValidationError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitUsage;
    } catch (const cvborn::SimulationError& err) {
        std::cerr << "simulation error: " << err.what() << "\n";
        return kExitSimulation;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitSimulation;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cvborn: homodyne sampling and Born-machine training on truncated Fock spaces"};
    app.require_subcommand(1);

    std::string sample_config, train_config, benchmark_config;
    CLI::App* sample = app.add_subcommand("sample", "draw homodyne samples from a circuit state");
    sample->add_option("config", sample_config, "JSON run configuration")->required();
    CLI::App* train = app.add_subcommand("train", "train a Born machine against a target");
    train->add_option("config", train_config, "JSON run configuration")->required();
    CLI::App* benchmark = app.add_subcommand("benchmark", "time the sampler across mode counts");
    benchmark->add_option("config", benchmark_config, "JSON run configuration")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (sample->parsed()) return run(cvborn::Command::Sample, sample_config);
    if (train->parsed()) return run(cvborn::Command::Train, train_config);
    return run(cvborn::Command::Benchmark, benchmark_config);
}
