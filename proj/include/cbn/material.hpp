#pragma once

#include "cbn/mesh.hpp"

#include <fstream>
#include <sstream>

namespace cbn {

enum class ElasticModel { PlaneStress, PlaneStrain, ThreeD };

struct Isotropic {
    double E = 1.0;
    double nu = 0.3;
};

/// (E, nu) from bulk and shear moduli of an isotropic material.
inline Isotropic from_bulk_shear(double K, double G) {
    if (!(K > 0) || !(G > 0)) throw ConfigError("bulk and shear moduli must be > 0");
    return {9.0 * K * G / (3.0 * K + G), (3.0 * K - 2.0 * G) / (6.0 * K + 2.0 * G)};
}

/// Isotropic elasticity matrix in engineering Voigt convention
/// (gamma_xy = 2 eps_xy); 3x3 for the plane models, 6x6 for 3D with
/// component order (xx, yy, zz, xy, yz, zx).
inline Mat elasticity_tensor(double E, double nu, ElasticModel model) {
    if (!(E > 0)) throw ConfigError("material: Young's modulus must be > 0");
    if (!(nu >= 0.0) || nu >= 0.5) throw ConfigError("material: Poisson ratio must be in [0, 0.5)");
    if (model == ElasticModel::PlaneStress) {
        Mat D(3, 3);
        const double c = E / (1.0 - nu * nu);
        D << c, c * nu, 0, c * nu, c, 0, 0, 0, c * (1.0 - nu) / 2.0;
        return D;
    }
    if (model == ElasticModel::PlaneStrain) {
        Mat D(3, 3);
        const double c = E / ((1.0 + nu) * (1.0 - 2.0 * nu));
        D << c * (1 - nu), c * nu, 0, c * nu, c * (1 - nu), 0, 0, 0, c * (1 - 2 * nu) / 2.0;
        return D;
    }
    Mat D = Mat::Zero(6, 6);
    const double c = E / ((1.0 + nu) * (1.0 - 2.0 * nu));
    const double g = E / (2.0 * (1.0 + nu));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) D(i, j) = i == j ? c * (1 - nu) : c * nu;
    D(3, 3) = D(4, 4) = D(5, 5) = g;
    return D;
}

// ---------------------------------------------------------------------------
// Region rasterization. Fine elements take the material of the last region
// containing their centroid; regions may live in the element frame (repeated
// per coarse element) or the global frame.

struct Region {
    enum class Shape { Ellipse, Rectangle, Slab };
    enum class Frame { Element, Global };

    Shape shape = Shape::Ellipse;
    Frame frame = Frame::Element;
    Vec3 center = Vec3::Zero();
    Vec3 half_size = Vec3::Zero();  // semi-axes (ellipse) or half extents (rectangle)
    double angle = 0.0;             // in-plane rotation of a 2D ellipse, radians
    int axis = 0;                   // slab only
    double lo = 0.0, hi = 0.0;      // slab only
    Isotropic mat;

    bool contains(const Vec3& p, int dim) const {
        switch (shape) {
            case Shape::Ellipse: {
                Vec3 rel = p - center;
                if (dim == 2 && angle != 0.0) {
                    const double c = std::cos(angle), s = std::sin(angle);
                    rel = Vec3(c * rel[0] + s * rel[1], -s * rel[0] + c * rel[1], 0.0);
                }
                double q = 0;
                for (int a = 0; a < dim; ++a) {
                    if (half_size[a] <= 0.0) return false;
                    const double d = rel[a] / half_size[a];
                    q += d * d;
                }
                return q <= 1.0;
            }
            case Shape::Rectangle: {
                Vec3 rel = p - center;
                for (int a = 0; a < dim; ++a)
                    if (std::abs(rel[a]) > half_size[a]) return false;
                return true;
            }
            case Shape::Slab:
                return p[axis] >= lo && p[axis] < hi;
        }
        return false;
    }
};

struct MaterialField {
    ElasticModel model = ElasticModel::PlaneStress;
    std::vector<double> young;    // per global fine element
    std::vector<double> poisson;  // per global fine element

    Mat tensor(long gcell) const {
        return elasticity_tensor(young[gcell], poisson[gcell], model);
    }

    /// Hash over the element's fine-cell materials, for the operator cache.
    std::uint64_t element_hash(const MeshHierarchy& mh, long e) const {
        std::uint64_t h = hash_u64(std::uint64_t(model));
        for (long c = 0; c < mh.fine_cells_per_coarse(); ++c) {
            const long g = mh.global_cell_of(e, c);
            h = hash_double(young[g], h);
            h = hash_double(poisson[g], h);
        }
        return h;
    }

    void validate(const MeshHierarchy& mh) const {
        if (long(young.size()) != mh.global_fine_cells() ||
            long(poisson.size()) != mh.global_fine_cells())
            throw ConfigError("material: field length must equal the fine element count");
        for (std::size_t i = 0; i < young.size(); ++i) {
            if (!(young[i] > 0)) throw ConfigError("material: Young's modulus must be > 0");
            if (!(poisson[i] >= 0.0) || poisson[i] >= 0.5)
                throw ConfigError("material: Poisson ratio must be in [0, 0.5)");
        }
    }
};

inline MaterialField uniform_material(const MeshHierarchy& mh, Isotropic mat, ElasticModel model) {
    MaterialField f;
    f.model = model;
    f.young.assign(mh.global_fine_cells(), mat.E);
    f.poisson.assign(mh.global_fine_cells(), mat.nu);
    return f;
}

inline MaterialField rasterize_regions(const MeshHierarchy& mh, Isotropic matrix,
                                       const std::vector<Region>& regions, ElasticModel model) {
    MaterialField f = uniform_material(mh, matrix, model);
    for (long g = 0; g < mh.global_fine_cells(); ++g) {
        const auto c = mh.global_fine.cell_coords(g);
        Vec3 centroid((c[0] + 0.5) * mh.fine_h[0], (c[1] + 0.5) * mh.fine_h[1],
                      mh.dim == 3 ? (c[2] + 0.5) * mh.fine_h[2] : 0.0);
        // Element-frame coordinates from integer cell indices, so boundary
        // cells never leak into a neighbor through rounding.
        Vec3 local = Vec3::Zero();
        for (int a = 0; a < mh.dim; ++a)
            local[a] = (c[a] % mh.local.cells_along(a) + 0.5) * mh.fine_h[a];
        for (const auto& rg : regions) {
            const Vec3& p = rg.frame == Region::Frame::Element ? local : centroid;
            if (rg.contains(p, mh.dim)) {
                f.young[g] = rg.mat.E;
                f.poisson[g] = rg.mat.nu;
            }
        }
    }
    f.validate(mh);
    return f;
}

/// Per-element Young's moduli from a CSV (one value per line/comma) or raw
/// little-endian double file, row-major in global fine element order.
inline MaterialField load_modulus_field(const MeshHierarchy& mh, const std::string& path,
                                        double nu, ElasticModel model) {
    std::vector<double> values;
    values.reserve(mh.global_fine_cells());
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".bin") {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("material.raw_file: cannot open " + path);
        double v;
        while (in.read(reinterpret_cast<char*>(&v), sizeof v)) values.push_back(v);
    } else {
        std::ifstream in(path);
        if (!in) throw ConfigError("material.raw_file: cannot open " + path);
        std::string tok;
        while (std::getline(in, tok)) {
            std::stringstream line(tok);
            std::string cell;
            while (std::getline(line, cell, ','))
                if (!cell.empty()) values.push_back(std::stod(cell));
        }
    }
    if (long(values.size()) != mh.global_fine_cells())
        throw ConfigError("material.raw_file: expected " +
                          std::to_string(mh.global_fine_cells()) + " values, got " +
                          std::to_string(values.size()));
    MaterialField f;
    f.model = model;
    f.young = std::move(values);
    f.poisson.assign(mh.global_fine_cells(), nu);
    f.validate(mh);
    return f;
}

}  // namespace cbn
