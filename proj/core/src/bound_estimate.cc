#include "shiftbound/bound_estimate.h"

namespace shiftbound {

std::string_view BoundStatusName(BoundStatus status) {
  switch (status) {
    case BoundStatus::kOptimal: return "optimal";
    case BoundStatus::kInfeasible: return "infeasible";
    case BoundStatus::kUnbounded: return "unbounded";
    case BoundStatus::kDegenerate: return "degenerate";
    case BoundStatus::kFailed: return "failed";
  }
  return "unknown";
}

}  // namespace shiftbound
