#pragma once

#include <stdexcept>
#include <string>

namespace kdb {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define KDB_DEFINE_ERROR(Name)          \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  };

KDB_DEFINE_ERROR(DuplicatePoints)
KDB_DEFINE_ERROR(InvalidArgument)
KDB_DEFINE_ERROR(InvalidSubset)
KDB_DEFINE_ERROR(UnsupportedSmoothness)
KDB_DEFINE_ERROR(NotPositiveDefinite)
KDB_DEFINE_ERROR(NoConvergence)
KDB_DEFINE_ERROR(SingularDiagonal)
KDB_DEFINE_ERROR(DegenerateRadius)
KDB_DEFINE_ERROR(WrongVariant)
KDB_DEFINE_ERROR(RankDeficientMoments)
KDB_DEFINE_ERROR(IoError)
KDB_DEFINE_ERROR(ConfigError)

#undef KDB_DEFINE_ERROR

}  // namespace kdb
