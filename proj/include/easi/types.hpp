#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace easi {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error hierarchy. The CLI maps DataError -> exit 3 and NumericError -> exit 4.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public Error {
public:
  using Error::Error;
};

class NumericError : public Error {
public:
  using Error::Error;
};

class DegenerateDenominator : public NumericError {
public:
  using NumericError::NumericError;
};

class NoConvergence : public NumericError {
public:
  using NumericError::NumericError;
};

class SingularMoments : public NumericError {
public:
  using NumericError::NumericError;
};

class SingularJacobian : public NumericError {
public:
  using NumericError::NumericError;
};

class ZeroShare : public NumericError {
public:
  using NumericError::NumericError;
};

class NonPositivePrice : public DataError {
public:
  using DataError::DataError;
};

class SchemaError : public DataError {
public:
  using DataError::DataError;
};

class ImputationError : public DataError {
public:
  using DataError::DataError;
};

class Infeasible : public NumericError {
public:
  using NumericError::NumericError;
};

class LafferRegion : public NumericError {
public:
  using NumericError::NumericError;
};

}  // namespace easi
