#pragma once

#include <stdexcept>
#include <string>

namespace souplab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DepthExceeded : Error {
  using Error::Error;
};
struct TokenOutOfRange : Error {
  using Error::Error;
};
struct BudgetExceeded : Error {
  using Error::Error;
};
struct NonFiniteReward : Error {
  using Error::Error;
};
struct SupportViolation : Error {
  using Error::Error;
};
struct SimplexViolation : Error {
  using Error::Error;
};
struct EmptyDataset : Error {
  using Error::Error;
};
struct Divergence : Error {
  using Error::Error;
};
struct ConstraintViolation : Error {
  using Error::Error;
};
struct SingularUpdate : Error {
  using Error::Error;
};
struct FeatureNotExact : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace souplab
