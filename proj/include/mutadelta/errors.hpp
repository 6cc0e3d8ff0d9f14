#pragma once

#include <stdexcept>
#include <string>

namespace mutadelta {

// Shape or rank disagreement between tensor operands.
struct shape_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite values or otherwise invalid numeric domain.
struct numeric_error : std::domain_error {
  using std::domain_error::domain_error;
};

// Index outside a valid range (class targets, positions, token ids).
struct index_error : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Caller violated an operation's precondition.
struct contract_error : std::logic_error {
  using std::logic_error::logic_error;
};

// Malformed external input (mutation codes, JSON records, config files).
struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Character outside the residue alphabet.
struct alphabet_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Record fields that disagree with each other.
struct consistency_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Prompt template misuse (missing parts, unknown template id).
struct template_error : std::logic_error {
  using std::logic_error::logic_error;
};

// Input longer than the model's maximum context.
struct context_error : std::length_error {
  using std::length_error::length_error;
};

// Corrupt or wrong-version serialized artifacts.
struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration values or missing files.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mutadelta
