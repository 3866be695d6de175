#pragma once

#include <stdexcept>
#include <string>

namespace treelm {

// One error class per failure family so callers can map them to exit codes
// without string matching.
enum class ErrorKind {
  Io,
  Encoding,
  EmptyDocument,
  EmptyCorpus,
  BudgetTooSmall,
  InvalidStride,
  MissingTokenization,
  SequenceTooLong,
  PlanMismatch,
  IndexOutOfTable,
  NonFiniteActivation,
  NoSelectedPositions,
  DivergenceDetected,
  LabelOutOfRange,
  PairBudgetExceeded,
  NoValidSpan,
  ConfigInvalid,
  LabelNodeMismatch,
  MissingFile,
  Schema,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  static Error io(const std::string& m) { return {ErrorKind::Io, m}; }
  static Error encoding(const std::string& m) { return {ErrorKind::Encoding, m}; }
  static Error empty_document(const std::string& m) { return {ErrorKind::EmptyDocument, m}; }
  static Error empty_corpus(const std::string& m) { return {ErrorKind::EmptyCorpus, m}; }
  static Error budget_too_small(const std::string& m) { return {ErrorKind::BudgetTooSmall, m}; }
  static Error invalid_stride(const std::string& m) { return {ErrorKind::InvalidStride, m}; }
  static Error missing_tokenization(const std::string& m) { return {ErrorKind::MissingTokenization, m}; }
  static Error sequence_too_long(const std::string& m) { return {ErrorKind::SequenceTooLong, m}; }
  static Error plan_mismatch(const std::string& m) { return {ErrorKind::PlanMismatch, m}; }
  static Error index_out_of_table(const std::string& m) { return {ErrorKind::IndexOutOfTable, m}; }
  static Error non_finite(const std::string& m) { return {ErrorKind::NonFiniteActivation, m}; }
  static Error no_selected_positions(const std::string& m) { return {ErrorKind::NoSelectedPositions, m}; }
  static Error divergence(const std::string& m) { return {ErrorKind::DivergenceDetected, m}; }
  static Error label_out_of_range(const std::string& m) { return {ErrorKind::LabelOutOfRange, m}; }
  static Error pair_budget(const std::string& m) { return {ErrorKind::PairBudgetExceeded, m}; }
  static Error no_valid_span(const std::string& m) { return {ErrorKind::NoValidSpan, m}; }
  static Error config_invalid(const std::string& m) { return {ErrorKind::ConfigInvalid, m}; }
  static Error label_node_mismatch(const std::string& m) { return {ErrorKind::LabelNodeMismatch, m}; }
  static Error missing_file(const std::string& m) { return {ErrorKind::MissingFile, m}; }
  static Error schema(const std::string& m) { return {ErrorKind::Schema, m}; }

 private:
  ErrorKind kind_;
};

}  // namespace treelm
