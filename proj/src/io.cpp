#include "cbsim/io.hpp"

namespace cbsim {

namespace {

std::string child(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

std::string elem(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
}

const Json& require(const Json& j, const std::string& key, const std::string& path) {
    if (!j.is_object())
        throw ValidationError("expected an object", path.empty() ? "." : path);
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError("missing field", child(path, key));
    return *it;
}

double number_at(const Json& j, const std::string& path) {
    if (!j.is_number()) throw ValidationError("expected a number", path);
    return j.get<double>();
}

int int_at(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ValidationError("expected an integer", path);
    return j.get<int>();
}

}  // namespace

Json complex_to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

Complex complex_from_json(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2)
        throw ValidationError("expected [re, im]", path);
    return Complex(number_at(j[0], elem(path, 0)), number_at(j[1], elem(path, 1)));
}

CMat matrix_from_json(const Json& j, const std::string& path) {
    int rows = int_at(require(j, "rows", path), child(path, "rows"));
    int cols = int_at(require(j, "cols", path), child(path, "cols"));
    if (rows < 1 || cols < 1)
        throw ValidationError("dimensions must be positive", child(path, "rows"));
    const Json& data = require(j, "data", path);
    const std::string dpath = child(path, "data");
    if (!j.is_object() || !data.is_array())
        throw ValidationError("expected an array", dpath);
    if (data.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
        throw ValidationError("entry count does not match rows * cols", dpath);
    CMat m(rows, cols);
    for (std::size_t k = 0; k < data.size(); ++k) {
        auto r = static_cast<Eigen::Index>(k) / cols;
        auto c = static_cast<Eigen::Index>(k) % cols;
        m(r, c) = complex_from_json(data[k], elem(dpath, k));
    }
    if (!m.allFinite())
        throw ValidationError("matrix entries must be finite", dpath);
    return m;
}

Json matrix_to_json(const CMat& m) {
    Json data = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            data.push_back(complex_to_json(m(r, c)));
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

OperatorSubspace subspace_from_json(const Json& j, const std::string& path) {
    int n = int_at(require(j, "ambient_dim", path), child(path, "ambient_dim"));
    const Json& basis = require(j, "basis", path);
    const std::string bpath = child(path, "basis");
    if (!basis.is_array() || basis.empty())
        throw ValidationError("expected a nonempty array", bpath);
    std::vector<CMat> mats;
    for (std::size_t k = 0; k < basis.size(); ++k)
        mats.push_back(matrix_from_json(basis[k], elem(bpath, k)));
    const Json& flag = require(j, "unital_algebra", path);
    if (!flag.is_boolean())
        throw ValidationError("expected a boolean", child(path, "unital_algebra"));
    try {
        return OperatorSubspace(n, std::move(mats), flag.get<bool>());
    } catch (const ValidationError& e) {
        throw ValidationError(e.what(), path.empty() ? e.field : child(path, e.field));
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what(), bpath);
    }
}

Json subspace_to_json(const OperatorSubspace& s) {
    Json basis = Json::array();
    for (const CMat& b : s.basis()) basis.push_back(matrix_to_json(b));
    return Json{{"ambient_dim", s.ambient_dim()},
                {"basis", std::move(basis)},
                {"unital_algebra", s.is_unital_algebra()}};
}

CBLinearMap map_from_json(const Json& j, const std::string& path) {
    OperatorSubspace dom = subspace_from_json(require(j, "domain", path), child(path, "domain"));
    OperatorSubspace cod =
        subspace_from_json(require(j, "codomain", path), child(path, "codomain"));
    const Json& imgs = require(j, "images", path);
    const std::string ipath = child(path, "images");
    if (!imgs.is_array()) throw ValidationError("expected an array", ipath);
    std::vector<CMat> images;
    for (std::size_t k = 0; k < imgs.size(); ++k)
        images.push_back(matrix_from_json(imgs[k], elem(ipath, k)));
    bool unital = j.value("unital", false);
    bool mult = j.value("multiplicative", false);
    try {
        return CBLinearMap(std::move(dom), std::move(cod), std::move(images), unital, mult);
    } catch (const ValidationError& e) {
        throw ValidationError(e.what(), path.empty() ? e.field : child(path, e.field));
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what(), ipath);
    }
}

Json map_to_json(const CBLinearMap& f) {
    Json imgs = Json::array();
    for (const CMat& m : f.images()) imgs.push_back(matrix_to_json(m));
    return Json{{"domain", subspace_to_json(f.domain())},
                {"codomain", subspace_to_json(f.codomain())},
                {"images", std::move(imgs)},
                {"unital", f.unital()},
                {"multiplicative", f.multiplicative()}};
}

BlaschkeProduct blaschke_from_json(const Json& j, const std::string& path) {
    const Json& roots = require(j, "roots", path);
    const std::string rpath = child(path, "roots");
    if (!roots.is_array() || roots.empty())
        throw ValidationError("expected a nonempty array", rpath);
    BlaschkeProduct b;
    for (std::size_t k = 0; k < roots.size(); ++k) {
        const std::string p = elem(rpath, k);
        const Json& r = roots[k];
        BlaschkeRoot root;
        root.lambda = Complex(number_at(require(r, "re", p), child(p, "re")),
                              number_at(require(r, "im", p), child(p, "im")));
        root.mult = r.contains("mult") ? int_at(r["mult"], child(p, "mult")) : 1;
        b.roots.push_back(root);
    }
    if (j.contains("constant"))
        b.constant = complex_from_json(j["constant"], child(path, "constant"));
    try {
        validate_blaschke(b);
    } catch (const ValidationError& e) {
        throw ValidationError(e.what(), path.empty() ? e.field : child(path, e.field));
    }
    return b;
}

Json blaschke_to_json(const BlaschkeProduct& b) {
    Json roots = Json::array();
    for (const BlaschkeRoot& r : b.roots)
        roots.push_back(Json{{"re", r.lambda.real()}, {"im", r.lambda.imag()}, {"mult", r.mult}});
    return Json{{"roots", std::move(roots)}, {"constant", complex_to_json(b.constant)}};
}

}  // namespace cbsim
