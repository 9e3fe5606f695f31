#pragma once

#include <stdexcept>
#include <string>

namespace pinnflow {

// Exit codes shared by every CLI entry point.
enum class ExitCode : int { Ok = 0, Usage = 2, Data = 3, Numeric = 4 };

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::Data)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("parse error: " + what) {}
};

class TopologyError : public Error {
 public:
  explicit TopologyError(const std::string& what) : Error("topology error: " + what) {}
};

class ValueError : public Error {
 public:
  explicit ValueError(const std::string& what) : Error("value error: " + what) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what) : Error("dimension mismatch: " + what) {}
};

class NonConvergence : public Error {
 public:
  NonConvergence(int iterations, double mismatch)
      : Error("power flow did not converge after " + std::to_string(iterations) +
                  " iterations (final mismatch " + std::to_string(mismatch) + ")",
              ExitCode::Numeric),
        iterations_(iterations),
        mismatch_(mismatch) {}
  int iterations() const noexcept { return iterations_; }
  double mismatch() const noexcept { return mismatch_; }

 private:
  int iterations_;
  double mismatch_;
};

class SingularJacobian : public Error {
 public:
  explicit SingularJacobian(int iteration)
      : Error("singular Jacobian at iteration " + std::to_string(iteration), ExitCode::Numeric),
        iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

class SolverFailure : public Error {
 public:
  SolverFailure(std::size_t row, const std::string& cause)
      : Error("solver failure at row " + std::to_string(row) + ": " + cause, ExitCode::Numeric),
        row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class CalibrationFailure : public Error {
 public:
  explicit CalibrationFailure(const std::string& what)
      : Error("calibration failure: " + what, ExitCode::Numeric) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(int epoch)
      : Error("training diverged (non-finite loss) at epoch " + std::to_string(epoch),
              ExitCode::Numeric),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class MissingTargets : public Error {
 public:
  MissingTargets() : Error("MSE loss requires target states") {}
};

class MissingInjections : public Error {
 public:
  MissingInjections() : Error("physics loss requires injection vectors") {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error("precondition violated: " + what) {}
};

class EmptyDataset : public Error {
 public:
  explicit EmptyDataset(const std::string& what) : Error("empty dataset: " + what) {}
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t a, std::size_t b)
      : Error("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class ZeroVariance : public Error {
 public:
  ZeroVariance() : Error("correlation undefined: zero variance", ExitCode::Numeric) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(what, ExitCode::Usage) {}
};

}  // namespace pinnflow
