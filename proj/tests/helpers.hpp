#pragma once

#include <filesystem>
#include <string>

#include "gps/task_data.hpp"

namespace testing_support {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(GPS_FIXTURES) / name;
}

inline std::filesystem::path data(const std::string& name) {
  return std::filesystem::path(GPS_DATA_DIR) / name;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gps_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline gps::TaskSpec text_task(std::vector<std::string> choices = {"no", "yes"}) {
  gps::TaskSpec t;
  t.name = "toy";
  t.input_fields = {{"text", ""}};
  t.num_classes = static_cast<int>(choices.size());
  t.answer_choices = std::move(choices);
  t.required_placeholders = {"text"};
  return t;
}

}  // namespace testing_support
