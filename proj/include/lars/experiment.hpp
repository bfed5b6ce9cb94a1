#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lars/config.hpp"
#include "lars/data.hpp"
#include "lars/output_resampling.hpp"
#include "lars/toy.hpp"
#include "lars/vae.hpp"

namespace lars {

// Translation from the flat config to the module configs.
DatasetSpec dataset_spec(const ExperimentConfig& cfg);
VaeConfig vae_config(const ExperimentConfig& cfg);
TrainConfig train_config(const ExperimentConfig& cfg);
ToyConfig toy_config(const ExperimentConfig& cfg);
OutputResamplingConfig output_config(const ExperimentConfig& cfg);

// FNV-1a over the bytes of every data file the config points at (hex).
std::string input_hash(const ExperimentConfig& cfg);

// Creates out.dir and writes config.txt plus run.json (subcommand, seed,
// config hash, input hash). Returns the directory.
std::filesystem::path prepare_run_dir(const ExperimentConfig& cfg, const std::string& subcommand);

}  // namespace lars
