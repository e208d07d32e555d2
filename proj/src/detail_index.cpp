#include "ndtwin/detail_index.hpp"

#include <stdexcept>

namespace ndtwin {

DetailIndexConfig di_preset(int level) {
    DetailIndexConfig di;
    di.level = level;
    switch (level) {
        case 1:
            di.max_interactions = 3;
            di.rays_per_source = 1e3;
            break;
        case 2:
            di.max_interactions = 3;
            di.rays_per_source = 1e3;
            di.enable_specular = true;
            break;
        case 3:
            di.max_interactions = 5;
            di.rays_per_source = 1e6;
            di.enable_specular = true;
            di.enable_diffuse = true;
            break;
        case 4:
            di.max_interactions = 8;
            di.rays_per_source = 1e10;
            di.enable_specular = true;
            di.enable_diffuse = true;
            di.enable_refraction = true;
            break;
        case 5:
            di.max_interactions = 8;
            di.rays_per_source = 1e10;
            di.enable_specular = true;
            di.enable_diffuse = true;
            di.enable_refraction = true;
            di.enable_diffraction = true;
            break;
        default:
            throw std::invalid_argument("detail index level must be 1..5");
    }
    return di;
}

}  // namespace ndtwin
