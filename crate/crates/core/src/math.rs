// Thin wrappers over libm so call sites read like std float methods.

#[inline(always)]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline(always)]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline(always)]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline(always)]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline(always)]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline(always)]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline(always)]
pub(crate) fn cbrt(x: f64) -> f64 {
    libm::cbrt(x)
}

#[inline(always)]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline(always)]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline(always)]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline(always)]
pub(crate) fn lgamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[inline(always)]
pub(crate) fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}
