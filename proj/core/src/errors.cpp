#include "sshlab/errors.hpp"

#include <sstream>

namespace sshlab {

namespace {
std::string gap_message(double k, double rcond) {
  std::ostringstream os;
  os.precision(17);
  os << "h(k) is singular at k=" << k << " (reciprocal condition " << rcond << ")";
  return os.str();
}
}  // namespace

GapClosed::GapClosed(double k, double rcond) : Error(gap_message(k, rcond)), k_(k), rcond_(rcond) {}

}  // namespace sshlab
