//! Reverse-mode differentiation on a thread-local Wengert list.
//!
//! [`Var`] is a `Copy` scalar carrying its primal value and an index into the
//! active tape. Every arithmetic operation on a tracked `Var` appends one node
//! holding the local partial derivatives with respect to at most two parents.
//! Operations whose operands are all constants produce constants and do not
//! touch the tape.
//!
//! A tape is scoped by [`Tape::record`]; only one recording may be active per
//! thread at a time.

use crate::scalar::Scalar;
use num_traits::{Float, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};
use std::cell::{Cell, RefCell};
use std::cmp::Ordering;
use std::fmt;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, Sub, SubAssign};

const CONST: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    a: u32,
    da: f64,
    b: u32,
    db: f64,
}

thread_local! {
    static NODES: RefCell<Vec<Node>> = const { RefCell::new(Vec::new()) };
    static ACTIVE: Cell<bool> = const { Cell::new(false) };
}

/// Scalar that records its computation history for reverse-mode gradients.
#[derive(Clone, Copy, Default)]
pub struct Var {
    val: f64,
    id: u32,
}

impl Var {
    /// An untracked constant.
    pub const fn constant(val: f64) -> Self {
        Var { val, id: CONST }
    }

    pub fn val(self) -> f64 {
        self.val
    }

    pub fn is_tracked(self) -> bool {
        self.id != CONST
    }

    fn unary(val: f64, x: Var, dx: f64) -> Var {
        if x.id == CONST {
            return Var::constant(val);
        }
        push(val, Node { a: x.id, da: dx, b: CONST, db: 0.0 })
    }

    fn binary(val: f64, x: Var, dx: f64, y: Var, dy: f64) -> Var {
        match (x.id == CONST, y.id == CONST) {
            (true, true) => Var::constant(val),
            (false, true) => push(val, Node { a: x.id, da: dx, b: CONST, db: 0.0 }),
            (true, false) => push(val, Node { a: y.id, da: dy, b: CONST, db: 0.0 }),
            (false, false) => push(val, Node { a: x.id, da: dx, b: y.id, db: dy }),
        }
    }
}

fn push(val: f64, node: Node) -> Var {
    NODES.with(|n| {
        let mut n = n.borrow_mut();
        let id = n.len();
        assert!(id < CONST as usize, "tape overflow");
        n.push(node);
        Var { val, id: id as u32 }
    })
}

/// Handle to the active recording on this thread.
pub struct Tape {
    _private: (),
}

impl Tape {
    /// Run `f` with a fresh tape. Returns `None` if a recording is already
    /// active on this thread.
    pub fn record<R>(f: impl FnOnce(&Tape) -> R) -> Option<R> {
        if ACTIVE.with(|a| a.replace(true)) {
            return None;
        }
        struct Reset;
        impl Drop for Reset {
            fn drop(&mut self) {
                NODES.with(|n| n.borrow_mut().clear());
                ACTIVE.with(|a| a.set(false));
            }
        }
        let _reset = Reset;
        NODES.with(|n| n.borrow_mut().clear());
        Some(f(&Tape { _private: () }))
    }

    /// New independent variable.
    pub fn var(&self, val: f64) -> Var {
        push(val, Node { a: CONST, da: 0.0, b: CONST, db: 0.0 })
    }

    pub fn vars(&self, vals: &[f64]) -> Vec<Var> {
        vals.iter().map(|&v| self.var(v)).collect()
    }

    pub fn len(&self) -> usize {
        NODES.with(|n| n.borrow().len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adjoints of `output` with respect to each of `inputs`.
    pub fn gradient(&self, output: Var, inputs: &[Var]) -> Vec<f64> {
        if output.id == CONST {
            return vec![0.0; inputs.len()];
        }
        let adj = NODES.with(|n| {
            let nodes = n.borrow();
            let mut adj = vec![0.0; output.id as usize + 1];
            adj[output.id as usize] = 1.0;
            for i in (0..=output.id as usize).rev() {
                let g = adj[i];
                if g == 0.0 {
                    continue;
                }
                let node = nodes[i];
                if node.a != CONST {
                    adj[node.a as usize] += g * node.da;
                }
                if node.b != CONST {
                    adj[node.b as usize] += g * node.db;
                }
            }
            adj
        });
        inputs
            .iter()
            .map(|v| if v.id == CONST || v.id as usize >= adj.len() { 0.0 } else { adj[v.id as usize] })
            .collect()
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_tracked() {
            write!(f, "Var({}, #{})", self.val, self.id)
        } else {
            write!(f, "Var({})", self.val)
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.val, f)
    }
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        self.val == other.val
    }
}

impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.val.partial_cmp(&other.val)
    }
}

impl Add for Var {
    type Output = Var;
    fn add(self, r: Var) -> Var {
        Var::binary(self.val + r.val, self, 1.0, r, 1.0)
    }
}

impl Sub for Var {
    type Output = Var;
    fn sub(self, r: Var) -> Var {
        Var::binary(self.val - r.val, self, 1.0, r, -1.0)
    }
}

impl Mul for Var {
    type Output = Var;
    fn mul(self, r: Var) -> Var {
        Var::binary(self.val * r.val, self, r.val, r, self.val)
    }
}

impl Div for Var {
    type Output = Var;
    fn div(self, r: Var) -> Var {
        let q = self.val / r.val;
        Var::binary(q, self, 1.0 / r.val, r, -q / r.val)
    }
}

impl Rem for Var {
    type Output = Var;
    fn rem(self, r: Var) -> Var {
        // a % b = a - b * trunc(a / b)
        let k = (self.val / r.val).trunc();
        Var::binary(self.val % r.val, self, 1.0, r, -k)
    }
}

impl Neg for Var {
    type Output = Var;
    fn neg(self) -> Var {
        Var::unary(-self.val, self, -1.0)
    }
}

macro_rules! assign_op {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for Var {
            fn $m(&mut self, r: Var) {
                *self = *self $op r;
            }
        }
    };
}
assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);

impl std::iter::Sum for Var {
    fn sum<I: Iterator<Item = Var>>(iter: I) -> Var {
        iter.fold(Var::constant(0.0), |a, b| a + b)
    }
}

impl Zero for Var {
    fn zero() -> Self {
        Var::constant(0.0)
    }
    fn is_zero(&self) -> bool {
        self.val == 0.0
    }
}

impl One for Var {
    fn one() -> Self {
        Var::constant(1.0)
    }
}

impl Num for Var {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Var::constant)
    }
}

impl ToPrimitive for Var {
    fn to_i64(&self) -> Option<i64> {
        self.val.to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.val.to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.val)
    }
}

impl NumCast for Var {
    fn from<N: ToPrimitive>(n: N) -> Option<Self> {
        n.to_f64().map(Var::constant)
    }
}

impl FromPrimitive for Var {
    fn from_i64(n: i64) -> Option<Self> {
        Some(Var::constant(n as f64))
    }
    fn from_u64(n: u64) -> Option<Self> {
        Some(Var::constant(n as f64))
    }
    fn from_f64(n: f64) -> Option<Self> {
        Some(Var::constant(n))
    }
}

impl Float for Var {
    fn nan() -> Self {
        Var::constant(f64::NAN)
    }
    fn infinity() -> Self {
        Var::constant(f64::INFINITY)
    }
    fn neg_infinity() -> Self {
        Var::constant(f64::NEG_INFINITY)
    }
    fn neg_zero() -> Self {
        Var::constant(-0.0)
    }
    fn min_value() -> Self {
        Var::constant(f64::MIN)
    }
    fn min_positive_value() -> Self {
        Var::constant(f64::MIN_POSITIVE)
    }
    fn epsilon() -> Self {
        Var::constant(f64::EPSILON)
    }
    fn max_value() -> Self {
        Var::constant(f64::MAX)
    }
    fn is_nan(self) -> bool {
        self.val.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.val.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.val.is_finite()
    }
    fn is_normal(self) -> bool {
        self.val.is_normal()
    }
    fn classify(self) -> FpCategory {
        self.val.classify()
    }
    // Piecewise-constant functions have zero derivative almost everywhere.
    fn floor(self) -> Self {
        Var::constant(self.val.floor())
    }
    fn ceil(self) -> Self {
        Var::constant(self.val.ceil())
    }
    fn round(self) -> Self {
        Var::constant(self.val.round())
    }
    fn trunc(self) -> Self {
        Var::constant(self.val.trunc())
    }
    fn fract(self) -> Self {
        Var::unary(self.val.fract(), self, 1.0)
    }
    fn abs(self) -> Self {
        let s = if self.val < 0.0 { -1.0 } else { 1.0 };
        Var::unary(self.val.abs(), self, s)
    }
    fn signum(self) -> Self {
        Var::constant(self.val.signum())
    }
    fn is_sign_positive(self) -> bool {
        self.val.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.val.is_sign_negative()
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.val;
        Var::unary(r, self, -r * r)
    }
    fn powi(self, n: i32) -> Self {
        let d = if n == 0 { 0.0 } else { n as f64 * self.val.powi(n - 1) };
        Var::unary(self.val.powi(n), self, d)
    }
    fn powf(self, e: Self) -> Self {
        let v = self.val.powf(e.val);
        let dx = if e.val == 0.0 { 0.0 } else { e.val * self.val.powf(e.val - 1.0) };
        let de = if self.val > 0.0 { v * self.val.ln() } else { 0.0 };
        Var::binary(v, self, dx, e, de)
    }
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        Var::unary(s, self, 0.5 / s)
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        Var::unary(e, self, e)
    }
    fn exp2(self) -> Self {
        let e = self.val.exp2();
        Var::unary(e, self, e * std::f64::consts::LN_2)
    }
    fn ln(self) -> Self {
        Var::unary(self.val.ln(), self, 1.0 / self.val)
    }
    fn log(self, base: Self) -> Self {
        self.ln() / base.ln()
    }
    fn log2(self) -> Self {
        Var::unary(self.val.log2(), self, 1.0 / (self.val * std::f64::consts::LN_2))
    }
    fn log10(self) -> Self {
        Var::unary(self.val.log10(), self, 1.0 / (self.val * std::f64::consts::LN_10))
    }
    fn to_degrees(self) -> Self {
        Var::unary(self.val.to_degrees(), self, 180.0 / std::f64::consts::PI)
    }
    fn to_radians(self) -> Self {
        Var::unary(self.val.to_radians(), self, std::f64::consts::PI / 180.0)
    }
    fn max(self, other: Self) -> Self {
        if self.val >= other.val || other.val.is_nan() {
            self
        } else {
            other
        }
    }
    fn min(self, other: Self) -> Self {
        if self.val <= other.val || other.val.is_nan() {
            self
        } else {
            other
        }
    }
    fn abs_sub(self, other: Self) -> Self {
        (self - other).max(Var::constant(0.0))
    }
    fn cbrt(self) -> Self {
        let c = self.val.cbrt();
        Var::unary(c, self, 1.0 / (3.0 * c * c))
    }
    fn hypot(self, other: Self) -> Self {
        let h = self.val.hypot(other.val);
        Var::binary(h, self, self.val / h, other, other.val / h)
    }
    fn sin(self) -> Self {
        Var::unary(self.val.sin(), self, self.val.cos())
    }
    fn cos(self) -> Self {
        Var::unary(self.val.cos(), self, -self.val.sin())
    }
    fn tan(self) -> Self {
        let t = self.val.tan();
        Var::unary(t, self, 1.0 + t * t)
    }
    fn asin(self) -> Self {
        Var::unary(self.val.asin(), self, 1.0 / (1.0 - self.val * self.val).sqrt())
    }
    fn acos(self) -> Self {
        Var::unary(self.val.acos(), self, -1.0 / (1.0 - self.val * self.val).sqrt())
    }
    fn atan(self) -> Self {
        Var::unary(self.val.atan(), self, 1.0 / (1.0 + self.val * self.val))
    }
    fn atan2(self, other: Self) -> Self {
        // self = y, other = x
        let r2 = self.val * self.val + other.val * other.val;
        Var::binary(self.val.atan2(other.val), self, other.val / r2, other, -self.val / r2)
    }
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn exp_m1(self) -> Self {
        Var::unary(self.val.exp_m1(), self, self.val.exp())
    }
    fn ln_1p(self) -> Self {
        Var::unary(self.val.ln_1p(), self, 1.0 / (1.0 + self.val))
    }
    fn sinh(self) -> Self {
        Var::unary(self.val.sinh(), self, self.val.cosh())
    }
    fn cosh(self) -> Self {
        Var::unary(self.val.cosh(), self, self.val.sinh())
    }
    fn tanh(self) -> Self {
        let t = self.val.tanh();
        Var::unary(t, self, 1.0 - t * t)
    }
    fn asinh(self) -> Self {
        Var::unary(self.val.asinh(), self, 1.0 / (self.val * self.val + 1.0).sqrt())
    }
    fn acosh(self) -> Self {
        Var::unary(self.val.acosh(), self, 1.0 / (self.val * self.val - 1.0).sqrt())
    }
    fn atanh(self) -> Self {
        Var::unary(self.val.atanh(), self, 1.0 / (1.0 - self.val * self.val))
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.val.integer_decode()
    }
}

impl Scalar for Var {
    fn lit(x: f64) -> Self {
        Var::constant(x)
    }
    fn value(self) -> f64 {
        self.val
    }
}
