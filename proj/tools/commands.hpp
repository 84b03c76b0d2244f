#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace psf4d::cli {

// Each command validates its configuration in prepare_*() (any throw there is
// a usage error, exit 2) and does the work in cmd_*(), which returns the exit
// status. Human output goes to `out`; warnings go to `err`.

void prepare_sample_noise(const RunConfig& config);
int cmd_sample_noise(const RunConfig& config, std::ostream& out);

void prepare_verify_covariance(const RunConfig& config, const std::string& noise_path);
int cmd_verify_covariance(const RunConfig& config, const std::string& noise_path,
                          std::ostream& out);

void prepare_run_pipeline(RunConfig& config);
int cmd_run_pipeline(const RunConfig& config, std::ostream& out);

void prepare_compare(const RunConfig& config, const std::vector<std::string>& traces);
int cmd_compare(const RunConfig& config, const std::vector<std::string>& traces,
                std::ostream& out, std::ostream& err);

}  // namespace psf4d::cli
