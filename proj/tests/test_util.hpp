#pragma once

#include "doctest.h"
#include "hkends/error.hpp"

template <class F>
hkends::ErrorKind error_kind_of(F&& f) {
  try {
    f();
  } catch (const hkends::Error& e) {
    return e.kind();
  }
  FAIL("expected an hkends::Error");
  return hkends::ErrorKind::InvalidArgument;
}
