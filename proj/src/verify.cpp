#include <cmath>
#include <sstream>

#include "uavplan/planner.hpp"

namespace uavplan {

namespace {

constexpr double kMobilityTol = 1e-6;   // m
constexpr double kClearanceTol = 1e-9;  // m, shrinkage of expanded boxes
constexpr double kBinaryTol = 1e-9;

std::string describe(const Vec3& v) {
  std::ostringstream os;
  os.precision(12);
  os << "(" << v.x() << ", " << v.y() << ", " << v.z() << ")";
  return os.str();
}

}  // namespace

bool Certificate::all_passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

const CheckResult* Certificate::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

Certificate verify_plan(const Scenario& scn, const Trajectory& traj, const Schedule& sched) {
  Certificate cert;
  const auto& uav = scn.uav;
  const int N = uav.N;
  const auto& q = traj.q;

  auto record = [&](CheckResult r) { cert.checks.push_back(std::move(r)); };

  CheckResult shape{"shape", true, -1, ""};
  if (static_cast<int>(q.size()) != N + 1) {
    shape.passed = false;
    shape.detail = "trajectory has " + std::to_string(q.size()) + " points, expected " + std::to_string(N + 1);
  } else if (sched.rows() != scn.K() || sched.cols() != N) {
    shape.passed = false;
    shape.detail = "schedule is " + std::to_string(sched.rows()) + " x " + std::to_string(sched.cols()) +
                   ", expected " + std::to_string(scn.K()) + " x " + std::to_string(N);
  }
  record(shape);
  if (!shape.passed) return cert;

  CheckResult endpoints{"endpoints", true, -1, ""};
  if ((q.front() - uav.q_initial).norm() > kMobilityTol) {
    endpoints = {"endpoints", false, 0, "q[0] = " + describe(q.front()) + " != qI = " + describe(uav.q_initial)};
  } else if ((q.back() - uav.q_final).norm() > kMobilityTol) {
    endpoints = {"endpoints", false, N, "q[N] = " + describe(q.back()) + " != qF = " + describe(uav.q_final)};
  }
  record(endpoints);

  CheckResult speed{"speed", true, -1, ""};
  CheckResult vertical{"vertical_speed", true, -1, ""};
  for (int n = 1; n <= N && (speed.passed || vertical.passed); ++n) {
    const Vec3 d = q[static_cast<std::size_t>(n)] - q[static_cast<std::size_t>(n - 1)];
    if (speed.passed && d.norm() > uav.step_limit() + kMobilityTol) {
      speed = {"speed", false, n, "step length " + std::to_string(d.norm()) + " m exceeds " +
                                      std::to_string(uav.step_limit()) + " m"};
    }
    if (vertical.passed && std::abs(d.z()) > uav.vertical_step_limit() + kMobilityTol) {
      vertical = {"vertical_speed", false, n, "vertical step " + std::to_string(std::abs(d.z())) + " m exceeds " +
                                                  std::to_string(uav.vertical_step_limit()) + " m"};
    }
  }
  record(speed);
  record(vertical);

  CheckResult altitude{"altitude", true, -1, ""};
  for (int n = 0; n <= N; ++n) {
    const double z = q[static_cast<std::size_t>(n)].z();
    if (z < uav.h_min - kMobilityTol || z > uav.h_max + kMobilityTol) {
      altitude = {"altitude", false, n, "z = " + std::to_string(z) + " m outside [Hmin, Hmax]"};
      break;
    }
  }
  record(altitude);

  CheckResult discrete{"discrete_clearance", true, -1, ""};
  for (int n = 0; n <= N && discrete.passed; ++n) {
    for (int l = 0; l < scn.L(); ++l) {
      ExpandedBuilding box = scn.avoidance_box(l);
      box.margin -= kClearanceTol;
      if (is_interior(box, q[static_cast<std::size_t>(n)])) {
        discrete = {"discrete_clearance", false, n,
                    "q[" + std::to_string(n) + "] = " + describe(q[static_cast<std::size_t>(n)]) +
                        " inside the safety margin of building " + std::to_string(l)};
        break;
      }
    }
  }
  record(discrete);

  CheckResult path{"continuous_path", true, -1, ""};
  for (int n = 1; n <= N && path.passed; ++n) {
    const Segment3 seg{q[static_cast<std::size_t>(n - 1)], q[static_cast<std::size_t>(n)]};
    for (int l = 0; l < scn.L(); ++l) {
      if (segment_intersects_interior(seg, scn.buildings[static_cast<std::size_t>(l)])) {
        path = {"continuous_path", false, n,
                "segment q[" + std::to_string(n - 1) + "] -> q[" + std::to_string(n) + "] crosses building " +
                    std::to_string(l)};
        break;
      }
    }
  }
  record(path);

  CheckResult schedule{"schedule", true, -1, ""};
  for (int j = 0; j < N && schedule.passed; ++j) {
    double sum = 0.0;
    for (int k = 0; k < scn.K(); ++k) {
      const double s = sched(k, j);
      if (std::abs(s) > kBinaryTol && std::abs(s - 1.0) > kBinaryTol) {
        schedule = {"schedule", false, j + 1,
                    "s[" + std::to_string(k) + "][" + std::to_string(j + 1) + "] = " + std::to_string(s) +
                        " is not binary"};
        break;
      }
      sum += s;
    }
    if (schedule.passed && sum > 1.0 + kBinaryTol) {
      schedule = {"schedule", false, j + 1, "slot " + std::to_string(j + 1) + " serves more than one GN"};
    }
  }
  record(schedule);
  return cert;
}

}  // namespace uavplan
