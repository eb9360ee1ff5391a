#pragma once

#include <string>

namespace calibra::cli {

// Each command returns the process exit code: 0 on success, 2 when the
// artifacts were written but the postcondition audit failed. Config and data
// problems throw and are mapped to exit 1 by main.
int cmd_calibrate_batch(const std::string& config_path, const std::string& out_dir,
                        bool quiet);
int cmd_calibrate_joint(const std::string& config_path, const std::string& out_dir,
                        bool quiet);
int cmd_simulate_online(const std::string& config_path, const std::string& out_dir,
                        bool quiet);
int cmd_audit(const std::string& config_path, const std::string& out_dir, bool quiet);
int cmd_demo(const std::string& which);

}  // namespace calibra::cli
