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

#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cvborn/cvbm.hpp"
#include "cvborn/gates.hpp"

namespace cvborn {

using json = nlohmann::json;

enum class Command { Sample, Train, Benchmark };

struct SampleBlock {
    long shots = 100;
    std::vector<double> angles;
};

struct TrainBlock {
    long shots = 1000;
    long grad_shots = 0;  // 0: same as shots
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long iterations = 100;
    double s_displacement = 1.0;
    double s_squeezing = 1.0;
    double sigma = 1.0;
    int baseline_repeats = 100;
    bool resample_target = true;
    std::vector<double> initial_weights;          // empty: zeros
    std::optional<std::vector<double>> target_weights;  // target = same circuit at these weights
    std::optional<std::string> target_csv;        // target = fixed sample pool
};

struct BenchmarkBlock {
    int min_modes = 2;
    int max_modes = 6;
    long samples = 100;
    int iterations = 100;
    int warmup = 10;
    int single_run_above = 6;  // beyond this mode count: one warmup, one iteration
};

/// One fully parsed run description. The schema is strict: unknown keys are
/// rejected so typos cannot silently change an experiment.
struct RunConfig {
    Command command = Command::Sample;
    CutoffSpec space;
    double hbar = 2.0;
    std::uint64_t seed = 12345;
    int pad = 10;
    double leakage_limit = 1e-3;
    std::vector<GateSpec> gates;
    std::vector<WeightBinding> bindings;
    std::optional<OccupationVector> input;
    std::string output_path;
    SampleBlock sample;
    TrainBlock train;
    BenchmarkBlock benchmark;

    Circuit circuit() const {
        Circuit c;
        c.space = space;
        c.hbar = hbar;
        c.gates = gates;
        c.bindings = bindings;
        c.input = input;
        c.leakage_limit = leakage_limit;
        c.pad = pad;
        return c;
    }
};

namespace detail {

inline void reject_unknown_keys(const json& object, std::initializer_list<const char*> allowed,
                                const std::string& context) {
    for (const auto& [key, value] : object.items()) {
        bool known = false;
        for (const char* name : allowed) {
            if (key == name) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ValidationError("config: unknown key '" + key + "' in " + context);
        }
    }
}

template <typename T>
inline T get_or(const json& object, const char* key, T fallback) {
    if (!object.contains(key)) return fallback;
    try {
        return object.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("config: key '") + key + "' has the wrong type");
    }
}

template <typename T>
inline T get_required(const json& object, const char* key, const std::string& context) {
    if (!object.contains(key)) {
        throw ValidationError("config: missing key '" + std::string(key) + "' in " + context);
    }
    try {
        return object.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("config: key '") + key + "' has the wrong type");
    }
}

inline GateKind gate_kind_from_name(const std::string& name) {
    if (name == "phaseshift") return GateKind::Phaseshift;
    if (name == "beamsplitter") return GateKind::Beamsplitter;
    if (name == "displacement") return GateKind::Displacement;
    if (name == "squeezing") return GateKind::Squeezing;
    if (name == "cubic_phase") return GateKind::CubicPhase;
    if (name == "cross_kerr") return GateKind::CrossKerr;
    throw ValidationError("config: unknown gate '" + name + "'");
}

inline void parse_gate_list(const json& list, std::vector<GateSpec>& gates,
                            std::vector<WeightBinding>& bindings) {
    if (!list.is_array()) throw ValidationError("config: 'circuit' must be an array of gates");
    for (std::size_t g = 0; g < list.size(); ++g) {
        const json& entry = list[g];
        if (!entry.is_object()) throw ValidationError("config: each gate must be an object");
        reject_unknown_keys(entry, {"gate", "modes", "params", "weight", "weight_slot"},
                            "circuit gate " + std::to_string(g));
        GateSpec gate;
        gate.kind = gate_kind_from_name(get_required<std::string>(entry, "gate", "gate entry"));
        const auto modes = get_required<std::vector<int>>(entry, "modes", "gate entry");
        if (static_cast<int>(modes.size()) != gate.arity()) {
            throw ValidationError("config: gate '" + std::string(gate_name(gate.kind)) + "' takes " +
                                  std::to_string(gate.arity()) + " mode(s)");
        }
        for (std::size_t i = 0; i < modes.size(); ++i) gate.modes[i] = modes[i];
        const auto params = get_required<std::vector<double>>(entry, "params", "gate entry");
        if (static_cast<int>(params.size()) > gate.param_count() || params.empty()) {
            throw ValidationError("config: gate '" + std::string(gate_name(gate.kind)) +
                                  "' takes 1.." + std::to_string(gate.param_count()) + " parameter(s)");
        }
        for (std::size_t i = 0; i < params.size(); ++i) gate.params[i] = params[i];
        gates.push_back(gate);
        if (entry.contains("weight")) {
            WeightBinding binding;
            binding.weight_index = get_required<int>(entry, "weight", "gate entry");
            binding.gate_position = static_cast<int>(g);
            binding.param_slot = get_or<int>(entry, "weight_slot", 0);
            bindings.push_back(binding);
        } else if (entry.contains("weight_slot")) {
            throw ValidationError("config: 'weight_slot' requires 'weight'");
        }
    }
}

inline json serialize_gate_list(const std::vector<GateSpec>& gates,
                                const std::vector<WeightBinding>& bindings) {
    json list = json::array();
    for (std::size_t g = 0; g < gates.size(); ++g) {
        const GateSpec& gate = gates[g];
        json entry;
        entry["gate"] = gate_name(gate.kind);
        entry["modes"] = std::vector<int>(gate.modes.begin(), gate.modes.begin() + gate.arity());
        entry["params"] =
            std::vector<double>(gate.params.begin(), gate.params.begin() + gate.param_count());
        for (const WeightBinding& b : bindings) {
            if (b.gate_position == static_cast<int>(g)) {
                entry["weight"] = b.weight_index;
                if (b.param_slot != 0) entry["weight_slot"] = b.param_slot;
            }
        }
        list.push_back(entry);
    }
    return list;
}

}  // namespace detail

/// Parses and validates a config document; paper-convention defaults
/// (hbar = 2, sigma = 1, s_D = s_S = 1, beta1 = 0.9, beta2 = 0.999) fill any
/// omitted fields.
inline RunConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& err) {
        throw ValidationError(std::string("config: invalid JSON: ") + err.what());
    }
    if (!root.is_object()) throw ValidationError("config: top level must be an object");
    detail::reject_unknown_keys(root,
                                {"command", "modes", "cutoff", "hbar", "seed", "pad",
                                 "leakage_limit", "circuit", "input", "output_path", "sample",
                                 "train", "benchmark"},
                                "top level");

    RunConfig config;
    const auto command = detail::get_required<std::string>(root, "command", "top level");
    if (command == "sample") {
        config.command = Command::Sample;
    } else if (command == "train") {
        config.command = Command::Train;
    } else if (command == "benchmark") {
        config.command = Command::Benchmark;
    } else {
        throw ValidationError("config: command must be sample, train or benchmark");
    }

    // the benchmark sweeps its own mode range, so "modes" is optional there
    config.space.modes = config.command == Command::Benchmark
                             ? detail::get_or<int>(root, "modes", 1)
                             : detail::get_required<int>(root, "modes", "top level");
    config.space.cutoff = detail::get_required<int>(root, "cutoff", "top level");
    validate(config.space);
    config.hbar = detail::get_or<double>(root, "hbar", 2.0);
    if (config.hbar <= 0.0) throw ValidationError("config: hbar must be positive");
    config.seed = detail::get_or<std::uint64_t>(root, "seed", 12345);
    config.pad = detail::get_or<int>(root, "pad", 10);
    config.leakage_limit = detail::get_or<double>(root, "leakage_limit", 1e-3);
    config.output_path = detail::get_required<std::string>(root, "output_path", "top level");

    if (root.contains("circuit")) {
        detail::parse_gate_list(root.at("circuit"), config.gates, config.bindings);
    }
    if (root.contains("input")) {
        config.input = detail::get_required<OccupationVector>(root, "input", "top level");
    }

    if (config.command == Command::Sample) {
        const json block = root.contains("sample") ? root.at("sample") : json::object();
        detail::reject_unknown_keys(block, {"shots", "angles"}, "'sample'");
        config.sample.shots = detail::get_or<long>(block, "shots", 100);
        if (config.sample.shots < 1) throw ValidationError("config: sample.shots must be >= 1");
        config.sample.angles = detail::get_or<std::vector<double>>(block, "angles", {});
        if (!config.sample.angles.empty() &&
            static_cast<int>(config.sample.angles.size()) != config.space.modes) {
            throw ValidationError("config: sample.angles needs one entry per mode");
        }
    } else if (config.command == Command::Train) {
        if (!root.contains("train")) throw ValidationError("config: missing 'train' block");
        const json& block = root.at("train");
        detail::reject_unknown_keys(
            block,
            {"shots", "grad_shots", "learning_rate", "beta1", "beta2", "epsilon", "iterations",
             "s_d", "s_s", "sigma", "baseline_repeats", "resample_target", "initial_weights",
             "target_weights", "target_csv"},
            "'train'");
        TrainBlock& t = config.train;
        t.shots = detail::get_required<long>(block, "shots", "'train'");
        t.grad_shots = detail::get_or<long>(block, "grad_shots", 0);
        t.learning_rate = detail::get_required<double>(block, "learning_rate", "'train'");
        t.beta1 = detail::get_or<double>(block, "beta1", 0.9);
        t.beta2 = detail::get_or<double>(block, "beta2", 0.999);
        t.epsilon = detail::get_or<double>(block, "epsilon", 1e-8);
        t.iterations = detail::get_required<long>(block, "iterations", "'train'");
        t.s_displacement = detail::get_or<double>(block, "s_d", 1.0);
        t.s_squeezing = detail::get_or<double>(block, "s_s", 1.0);
        t.sigma = detail::get_or<double>(block, "sigma", 1.0);
        t.baseline_repeats = detail::get_or<int>(block, "baseline_repeats", 100);
        t.resample_target = detail::get_or<bool>(block, "resample_target", true);
        t.initial_weights = detail::get_or<std::vector<double>>(block, "initial_weights", {});
        if (block.contains("target_weights")) {
            t.target_weights = detail::get_required<std::vector<double>>(block, "target_weights", "'train'");
        }
        if (block.contains("target_csv")) {
            t.target_csv = detail::get_required<std::string>(block, "target_csv", "'train'");
        }
        if (t.target_weights.has_value() == t.target_csv.has_value()) {
            throw ValidationError("config: train needs exactly one of target_weights / target_csv");
        }
    } else {
        const json block = root.contains("benchmark") ? root.at("benchmark") : json::object();
        detail::reject_unknown_keys(
            block, {"min_modes", "max_modes", "samples", "iterations", "warmup", "single_run_above"},
            "'benchmark'");
        BenchmarkBlock& b = config.benchmark;
        b.min_modes = detail::get_or<int>(block, "min_modes", 2);
        b.max_modes = detail::get_or<int>(block, "max_modes", 6);
        b.samples = detail::get_or<long>(block, "samples", 100);
        b.iterations = detail::get_or<int>(block, "iterations", 100);
        b.warmup = detail::get_or<int>(block, "warmup", 10);
        b.single_run_above = detail::get_or<int>(block, "single_run_above", 6);
        if (b.min_modes < 1 || b.max_modes < b.min_modes) {
            throw ValidationError("config: benchmark mode range is invalid");
        }
        if (b.samples < 1 || b.iterations < 1 || b.warmup < 0) {
            throw ValidationError("config: benchmark counts must be positive");
        }
    }

    // Physical consistency of the circuit itself.
    validate(config.circuit());
    if (config.command == Command::Train) {
        const int weight_count = static_cast<int>(config.bindings.size());
        if (weight_count == 0) throw ValidationError("config: train circuit has no weights");
        if (!config.train.initial_weights.empty() &&
            static_cast<int>(config.train.initial_weights.size()) != weight_count) {
            throw ValidationError("config: initial_weights length does not match weight count");
        }
        if (config.train.target_weights &&
            static_cast<int>(config.train.target_weights->size()) != weight_count) {
            throw ValidationError("config: target_weights length does not match weight count");
        }
    }
    return config;
}

inline json serialize_config(const RunConfig& config) {
    json root;
    switch (config.command) {
        case Command::Sample: root["command"] = "sample"; break;
        case Command::Train: root["command"] = "train"; break;
        case Command::Benchmark: root["command"] = "benchmark"; break;
    }
    root["modes"] = config.space.modes;
    root["cutoff"] = config.space.cutoff;
    root["hbar"] = config.hbar;
    root["seed"] = config.seed;
    root["pad"] = config.pad;
    root["leakage_limit"] = config.leakage_limit;
    root["output_path"] = config.output_path;
    if (!config.gates.empty()) {
        root["circuit"] = detail::serialize_gate_list(config.gates, config.bindings);
    }
    if (config.input) root["input"] = *config.input;
    if (config.command == Command::Sample) {
        json block;
        block["shots"] = config.sample.shots;
        if (!config.sample.angles.empty()) block["angles"] = config.sample.angles;
        root["sample"] = block;
    } else if (config.command == Command::Train) {
        const TrainBlock& t = config.train;
        json block;
        block["shots"] = t.shots;
        if (t.grad_shots > 0) block["grad_shots"] = t.grad_shots;
        block["learning_rate"] = t.learning_rate;
        block["beta1"] = t.beta1;
        block["beta2"] = t.beta2;
        block["epsilon"] = t.epsilon;
        block["iterations"] = t.iterations;
        block["s_d"] = t.s_displacement;
        block["s_s"] = t.s_squeezing;
        block["sigma"] = t.sigma;
        block["baseline_repeats"] = t.baseline_repeats;
        block["resample_target"] = t.resample_target;
        if (!t.initial_weights.empty()) block["initial_weights"] = t.initial_weights;
        if (t.target_weights) block["target_weights"] = *t.target_weights;
        if (t.target_csv) block["target_csv"] = *t.target_csv;
        root["train"] = block;
    } else {
        const BenchmarkBlock& b = config.benchmark;
        json block;
        block["min_modes"] = b.min_modes;
        block["max_modes"] = b.max_modes;
        block["samples"] = b.samples;
        block["iterations"] = b.iterations;
        block["warmup"] = b.warmup;
        block["single_run_above"] = b.single_run_above;
        root["benchmark"] = block;
    }
    return root;
}

}  // namespace cvborn
