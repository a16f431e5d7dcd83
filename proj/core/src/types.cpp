#include "otg/error.hpp"
#include <algorithm>
#include "otg/types.hpp"

namespace otg {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidDuration: return "invalid duration";
    case ErrorKind::InvalidParameter: return "invalid parameter";
    case ErrorKind::SingularSystem: return "singular system";
    case ErrorKind::OutOfLimits: return "out of limits";
    case ErrorKind::TimeAllocationFailure: return "time allocation failure";
    case ErrorKind::StaleInput: return "stale input";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Topology: return "topology error";
    case ErrorKind::ChainResolution: return "chain-resolution error";
    case ErrorKind::Input: return "input error";
    case ErrorKind::DofMismatch: return "dof mismatch";
  }
  return "error";
}

bool JointLimits::clamp(JointVector& q) const {
  bool moved = false;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    const double c = std::clamp(q(j), lower(j), upper(j));
    if (c != q(j)) {
      q(j) = c;
      moved = true;
    }
  }
  return moved;
}

bool JointLimits::contains(const JointVector& q, double slack) const {
  return q.size() == lower.size() && ((q.array() >= lower.array() - slack) && (q.array() <= upper.array() + slack)).all();
}

}  // namespace otg
