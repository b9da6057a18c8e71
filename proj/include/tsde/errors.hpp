#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tsde {

/// Raised when an integrator state stops being finite. Carries enough context
/// to locate the offending path and step in a batch run.
class divergence_error : public std::runtime_error {
 public:
  divergence_error(std::uint64_t step_index, double time, Eigen::VectorXd position)
      : std::runtime_error(format(step_index, time, position)),
        step_index_(step_index),
        time_(time),
        position_(std::move(position)) {}

  std::uint64_t step_index() const noexcept { return step_index_; }
  double time() const noexcept { return time_; }
  const Eigen::VectorXd& position() const noexcept { return position_; }

 private:
  static std::string format(std::uint64_t step_index, double time,
                            const Eigen::VectorXd& position) {
    std::ostringstream os;
    os << "non-finite state at step " << step_index << ", t=" << time << ", x=[";
    for (Eigen::Index i = 0; i < position.size(); ++i) {
      if (i) os << ", ";
      os << position[i];
    }
    os << "]";
    return os.str();
  }

  std::uint64_t step_index_;
  double time_;
  Eigen::VectorXd position_;
};

/// Configuration file / CLI argument problems. Mapped to exit code 2.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A problem failed its structural-condition checks before an experiment;
/// experiments refuse to run on such a problem. Mapped to exit code 1.
class assumption_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tsde
