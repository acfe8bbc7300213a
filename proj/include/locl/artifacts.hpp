#pragma once

#include <string>

#include "locl/data.hpp"
#include "locl/evaluation.hpp"

namespace locl {

// Dataset artifact: JSON document carrying the preprocessed matrix, feature
// metadata, labels, and normalization statistics.
void save_dataset(const TabularDataset& d, const std::string& path);
TabularDataset load_dataset(const std::string& path);

void save_preprocess_report(const PreprocessReport& r, const TabularDataset& d,
                            const std::string& path);

void save_eval_report(const EvalReport& r, const std::string& path);
EvalReport load_eval_report(const std::string& path);

std::string eval_report_text(const std::vector<EvalReport>& reports);

}  // namespace locl
