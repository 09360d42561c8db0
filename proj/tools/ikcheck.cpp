#include "forcerl/contact_sim.hpp"
#include <cstdio>
using namespace forcerl;
int main() {
  std::vector<LinkParams> links;
  for (double l : {0.30, 0.25, 0.20}) { double m = 4.0*l; links.push_back({l, m, l/2, m*l*l/12.0}); }
  auto model = ManipulatorModel::planar(links);
  HoleGeometry g;
  EePose seat = seated_pose_for(g);
  EePose start = EePose::planar(seat.position.x(), seat.position.y()+0.10, seat.planar_angle());
  for (double a : {-0.3, 0.2, -0.8}) {
    Vec s(3); for (int i=0;i<3;++i) s[i]=a-0.4*i;
    auto rs = inverse_kinematics(model, seat, s);
    auto rt = inverse_kinematics(model, start, s);
    std::printf("seed %.1f: seat conv %d q=[%.3f %.3f %.3f]  start conv %d q=[%.3f %.3f %.3f]\n",
                a, rs.converged, rs.q[0], rs.q[1], rs.q[2], rt.converged, rt.q[0], rt.q[1], rt.q[2]);
  }
}
