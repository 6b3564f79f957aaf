#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fusemil {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matd = Mat<double>;
using Vecd = Vec<double>;
using Matf = Mat<float>;

/// Error taxonomy mapped to process exit codes by the CLI:
/// config_error -> 2, data_error (and schema_error) -> 3, numeric_error -> 4.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct config_error : error {
  using error::error;
};
struct data_error : error {
  using error::error;
};
struct schema_error : data_error {
  using data_error::data_error;
};
struct numeric_error : error {
  using error::error;
};

/// Non-fatal diagnostics (degenerate inputs, metric sentinels). Writes to
/// stderr unless a sink is installed.
void warn(const std::string& message);
void set_warn_sink(std::function<void(const std::string&)> sink);

/// Static-partition parallel map over [0, n). Each worker owns a disjoint
/// index range, so results are independent of the thread count.
void parallel_for(int n, int n_threads, const std::function<void(int)>& body);

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace fusemil
