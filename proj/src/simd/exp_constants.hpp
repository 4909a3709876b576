#pragma once

#include <array>

namespace dmm::simd::exp_detail {

inline constexpr double kLog2e = 0x1.71547652b82fep+0;
// fdlibm split of ln 2; the high part has zero low bits so k * kLn2Hi is exact.
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kMinArg = -708.0;
inline constexpr double kMaxArg = 709.0;
inline constexpr double kBiasMagic = 0x1.0p52 + 1023.0;

// Taylor coefficients, highest degree first (Horner order).
inline constexpr std::array<double, 14> kCoeff = {
    0x1.6124613a86d09p-33  /* 1/13! */,
    0x1.1eed8eff8d898p-29  /* 1/12! */,
    0x1.ae64567f544e4p-26  /* 1/11! */,
    0x1.27e4fb7789f5cp-22  /* 1/10! */,
    0x1.71de3a556c734p-19  /* 1/9! */,
    0x1.a01a01a01a01ap-16  /* 1/8! */,
    0x1.a01a01a01a01ap-13  /* 1/7! */,
    0x1.6c16c16c16c17p-10  /* 1/6! */,
    0x1.1111111111111p-7  /* 1/5! */,
    0x1.5555555555555p-5  /* 1/4! */,
    0x1.5555555555555p-3  /* 1/3! */,
    0x1.0000000000000p-1  /* 1/2! */,
    0x1.0000000000000p+0  /* 1/1! */,
    0x1.0000000000000p+0  /* 1/0! */};

}  // namespace dmm::simd::exp_detail
