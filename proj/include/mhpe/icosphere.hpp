// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <vector>

#include "mhpe/common.hpp"

namespace mhpe::geom {

/// Unit icosphere: subdivided icosahedron with all vertices on the unit
/// sphere. Vertex/face order is deterministic.
struct Icosphere {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> faces;
};

inline Icosphere make_icosphere(int subdivisions) {
    if (subdivisions < 0 || subdivisions > 6) throw ArgumentError("make_icosphere: bad level");
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    Icosphere s;
    const double pts[12][3] = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                               {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                               {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    for (const auto& p : pts) s.vertices.push_back(Eigen::Vector3d(p[0], p[1], p[2]).normalized());
    s.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
               {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
               {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
               {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const int idx = static_cast<int>(s.vertices.size());
            s.vertices.push_back(((s.vertices[a] + s.vertices[b]) * 0.5).normalized());
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(s.faces.size() * 4);
        for (const auto& f : s.faces) {
            const int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
            next.push_back({f[0], a, c});
            next.push_back({f[1], b, a});
            next.push_back({f[2], c, b});
            next.push_back({a, b, c});
        }
        s.faces = std::move(next);
    }
    return s;
}

}  // namespace mhpe::geom
