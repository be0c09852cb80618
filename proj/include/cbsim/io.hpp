// JSON interchange for the core value types.
//
// Deserializers validate shape and semantics and throw ValidationError with
// the offending field path, so the CLI can map them to exit code 2.

#pragma once

#include <json.hpp>

#include <string>

#include "cbsim/counterexample.hpp"
#include "cbsim/model_space.hpp"
#include "cbsim/operator_space.hpp"

namespace cbsim {

using Json = nlohmann::json;

// {"rows": n, "cols": m, "data": [[re, im], ...]} row-major.
CMat matrix_from_json(const Json& j, const std::string& path);
Json matrix_to_json(const CMat& m);

// {"ambient_dim": n, "basis": [matrix...], "unital_algebra": bool}.
OperatorSubspace subspace_from_json(const Json& j, const std::string& path);
Json subspace_to_json(const OperatorSubspace& s);

// {"domain": subspace, "codomain": subspace, "images": [matrix...]}
// with optional "unital" and "multiplicative" flags.
CBLinearMap map_from_json(const Json& j, const std::string& path);
Json map_to_json(const CBLinearMap& f);

// {"roots": [{"re":..,"im":..,"mult":k}...], "constant": [re, im]}.
BlaschkeProduct blaschke_from_json(const Json& j, const std::string& path);
Json blaschke_to_json(const BlaschkeProduct& b);

Json complex_to_json(Complex z);
Complex complex_from_json(const Json& j, const std::string& path);

}  // namespace cbsim
