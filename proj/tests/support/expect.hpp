#pragma once

#include <gtest/gtest.h>

#include <functional>
#include <optional>

#include "cpo/error.hpp"

namespace cpo::testing {

/// Code of the cpo::Error thrown by `fn`, or nullopt when nothing is thrown.
inline std::optional<ErrorCode> thrown_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace cpo::testing

#define EXPECT_CPO_ERROR(statement, expected) \
  EXPECT_EQ(::cpo::testing::thrown_code([&] { statement; }), std::optional(expected))
