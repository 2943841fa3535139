#include "ifgan/rng.hpp"

#include <sstream>
#include <stdexcept>

namespace ifgan {

std::string Rng::serialize() const {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
    os.precision(17);
    os << spare_;
    return os.str();
}

Rng Rng::deserialize(const std::string& text) {
    Rng rng(0);
    std::istringstream is(text);
    is.imbue(std::locale::classic());
    int has = 0;
    is >> rng.engine_ >> has >> rng.spare_;
    if (!is) throw std::runtime_error("Rng::deserialize: malformed state");
    rng.has_spare_ = has != 0;
    return rng;
}

}  // namespace ifgan
