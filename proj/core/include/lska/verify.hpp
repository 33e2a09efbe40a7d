#pragma once

#include <string>
#include <vector>

namespace lska {

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyOptions {
  std::string filter;       // substring match on property name; empty = all
  bool corrupt_vjp = false; // negative-control hook for the gradient check
};

// Full invariant suite: rank-1 equivalence, gradient checks, impulse
// receptive field, analytic-vs-instrumented cost, probe identities.
std::vector<PropertyResult> run_verification(const VerifyOptions& options = {});

}  // namespace lska
