//! Thin shim over the transcendental functions so the crate builds without `std`.

macro_rules! unary {
    ($($name:ident => $libm:ident),* $(,)?) => {$(
        #[cfg(feature = "std")]
        #[inline(always)]
        pub(crate) fn $name(x: f64) -> f64 {
            x.$name()
        }
        #[cfg(not(feature = "std"))]
        #[inline(always)]
        pub(crate) fn $name(x: f64) -> f64 {
            libm::$libm(x)
        }
    )*};
}

unary!(
    sin => sin,
    cos => cos,
    tanh => tanh,
    exp => exp,
    ln => log,
    sqrt => sqrt,
    cbrt => cbrt,
);

#[cfg(feature = "std")]
#[inline(always)]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    x.powf(y)
}

#[cfg(not(feature = "std"))]
#[inline(always)]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline(always)]
pub(crate) fn sin_cos(x: f64) -> (f64, f64) {
    (sin(x), cos(x))
}
