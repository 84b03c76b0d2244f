#pragma once

#include <stdexcept>
#include <string>

namespace psf4d {

/// Base for every error raised by the toolkit. `kind()` is a short stable
/// token used by the CLI when it prints machine-parsable diagnostics.
class Error : public std::runtime_error {
  public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

  private:
    std::string kind_;
};

/// Out-of-range scalar parameter (gamma, lambda, beta range, omega, ...).
class ParameterError : public Error {
  public:
    explicit ParameterError(const std::string& what) : Error("parameter", what) {}
};

/// Zero-length axis, mismatched shapes, mismatched widths.
class ShapeError : public Error {
  public:
    explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

class IndexError : public Error {
  public:
    explicit IndexError(const std::string& what) : Error("index", what) {}
};

/// A noise predictor returned something that violates its contract.
class ContractError : public Error {
  public:
    explicit ContractError(const std::string& what) : Error("contract", what) {}
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
  public:
    DivergenceError(int step, const std::string& what)
        : Error("divergence", what), step_(step) {}

    int step() const noexcept { return step_; }

  private:
    int step_;
};

/// Consensus fitting could not invert a view map.
class FitError : public Error {
  public:
    explicit FitError(const std::string& what) : Error("fit", what) {}
};

/// A metric was requested on input where it is not defined.
class MetricError : public Error {
  public:
    explicit MetricError(const std::string& what) : Error("metric", what) {}
};

class IoError : public Error {
  public:
    explicit IoError(const std::string& what) : Error("io", what) {}
};

/// Binary latent format violations. Each failure mode has its own kind so
/// callers can tell a foreign file from a damaged one.
class FormatError : public Error {
  public:
    enum class Reason { magic, version, dtype, truncated, trailing, shape };

    FormatError(Reason reason, const std::string& what)
        : Error(kind_for(reason), what), reason_(reason) {}

    Reason reason() const noexcept { return reason_; }

  private:
    static std::string kind_for(Reason r) {
        switch (r) {
            case Reason::magic: return "format.magic";
            case Reason::version: return "format.version";
            case Reason::dtype: return "format.dtype";
            case Reason::truncated: return "format.truncated";
            case Reason::trailing: return "format.trailing";
            case Reason::shape: return "format.shape";
        }
        return "format";
    }

    Reason reason_;
};

}  // namespace psf4d
