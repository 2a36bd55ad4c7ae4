#include "subsetvis/error.hpp"

namespace subsetvis {

void fail(ErrorKind kind, std::string code, const std::string& message) {
  throw Error(kind, std::move(code), message);
}

}  // namespace subsetvis
