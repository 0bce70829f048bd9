//! Compiled BLS12-381 backend for platoonzk.
//!
//! Mirrors the byte-level surface of `platoonzk._pybls`: compressed points
//! in, compressed points out, scalars as Python ints, `Gt` as an opaque
//! target-group handle with a canonical 576-byte encoding.

use bls12_381::hash_to_curve::{ExpandMsgXmd, HashToCurve};
use bls12_381::{
    multi_miller_loop, pairing as bls_pairing, G1Affine, G1Projective, G2Affine, G2Prepared,
    G2Projective, Scalar,
};
use num_bigint::BigUint;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

const R_HEX: &str = "73eda753299d7d483339d80809a1d80553bda402fffe5bfeffffffff00000001";

fn scalar_from(k: &BigUint) -> Scalar {
    let r = BigUint::parse_bytes(R_HEX.as_bytes(), 16).unwrap();
    let mut le = (k % &r).to_bytes_le();
    le.resize(32, 0);
    let mut buf = [0u8; 32];
    buf.copy_from_slice(&le);
    Scalar::from_bytes(&buf).unwrap()
}

fn g1_from(data: &[u8]) -> PyResult<G1Affine> {
    let arr: &[u8; 48] = data
        .try_into()
        .map_err(|_| PyValueError::new_err(format!("expected 48 bytes, got {}", data.len())))?;
    Option::from(G1Affine::from_compressed(arr))
        .ok_or_else(|| PyValueError::new_err("invalid G1 encoding"))
}

fn g2_from(data: &[u8]) -> PyResult<G2Affine> {
    let arr: &[u8; 96] = data
        .try_into()
        .map_err(|_| PyValueError::new_err(format!("expected 96 bytes, got {}", data.len())))?;
    Option::from(G2Affine::from_compressed(arr))
        .ok_or_else(|| PyValueError::new_err("invalid G2 encoding"))
}

/// Canonical encoding: the 12 Fp coefficients in tower order, big-endian.
/// The crate keeps Fp12 private, so the coefficients are read back from
/// its Debug rendering, which prints each Fp as a 0x-prefixed hex string.
fn gt_bytes(gt: &bls12_381::Gt) -> Vec<u8> {
    let text = format!("{:?}", gt);
    let mut out = Vec::with_capacity(576);
    let mut rest = text.as_str();
    while let Some(pos) = rest.find("0x") {
        let hex = &rest[pos + 2..pos + 2 + 96];
        for i in 0..48 {
            out.push(u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).unwrap());
        }
        rest = &rest[pos + 2 + 96..];
    }
    assert_eq!(out.len(), 576);
    out
}

#[pyclass(module = "platoonzk._native", frozen)]
#[derive(Clone)]
struct Gt {
    inner: bls12_381::Gt,
}

#[pymethods]
impl Gt {
    #[staticmethod]
    fn one() -> Self {
        Gt { inner: bls12_381::Gt::identity() }
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new_bound(py, &gt_bytes(&self.inner))
    }

    fn __mul__(&self, other: &Gt) -> Gt {
        Gt { inner: self.inner + other.inner }
    }

    fn __pow__(&self, k: BigUint, _modulo: Option<PyObject>) -> Gt {
        Gt { inner: self.inner * scalar_from(&k) }
    }

    fn __eq__(&self, other: &Bound<'_, PyAny>) -> bool {
        match other.extract::<Gt>() {
            Ok(o) => self.inner == o.inner,
            Err(_) => false,
        }
    }

    fn __hash__(&self) -> u64 {
        let b = gt_bytes(&self.inner);
        u64::from_le_bytes(b[..8].try_into().unwrap())
    }

    fn is_one(&self) -> bool {
        self.inner == bls12_381::Gt::identity()
    }
}

#[pyfunction]
fn g1_generator<'py>(py: Python<'py>) -> Bound<'py, PyBytes> {
    PyBytes::new_bound(py, &G1Affine::generator().to_compressed())
}

#[pyfunction]
fn g2_generator<'py>(py: Python<'py>) -> Bound<'py, PyBytes> {
    PyBytes::new_bound(py, &G2Affine::generator().to_compressed())
}

/// Decodes and checks on-curve and subgroup membership.
#[pyfunction]
fn g1_validate(data: &[u8]) -> bool {
    g1_from(data).is_ok()
}

#[pyfunction]
fn g2_validate(data: &[u8]) -> bool {
    g2_from(data).is_ok()
}

#[pyfunction]
fn g1_mul<'py>(py: Python<'py>, point: &[u8], k: BigUint) -> PyResult<Bound<'py, PyBytes>> {
    let p = g1_from(point)?;
    let s = scalar_from(&k);
    let out = py.allow_threads(|| G1Affine::from(p * s).to_compressed());
    Ok(PyBytes::new_bound(py, &out))
}

#[pyfunction]
fn g2_mul<'py>(py: Python<'py>, point: &[u8], k: BigUint) -> PyResult<Bound<'py, PyBytes>> {
    let p = g2_from(point)?;
    let s = scalar_from(&k);
    let out = py.allow_threads(|| G2Affine::from(p * s).to_compressed());
    Ok(PyBytes::new_bound(py, &out))
}

#[pyfunction]
fn g1_add<'py>(py: Python<'py>, a: &[u8], b: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    let sum = G1Projective::from(g1_from(a)?) + G1Projective::from(g1_from(b)?);
    Ok(PyBytes::new_bound(py, &G1Affine::from(sum).to_compressed()))
}

#[pyfunction]
fn g2_add<'py>(py: Python<'py>, a: &[u8], b: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    let sum = G2Projective::from(g2_from(a)?) + G2Projective::from(g2_from(b)?);
    Ok(PyBytes::new_bound(py, &G2Affine::from(sum).to_compressed()))
}

#[pyfunction]
fn g1_neg<'py>(py: Python<'py>, a: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    Ok(PyBytes::new_bound(py, &(-g1_from(a)?).to_compressed()))
}

#[pyfunction]
fn hash_to_g1<'py>(py: Python<'py>, msg: &[u8], dst: &[u8]) -> Bound<'py, PyBytes> {
    let out = py.allow_threads(|| {
        let p = <G1Projective as HashToCurve<ExpandMsgXmd<sha2::Sha256>>>::hash_to_curve(msg, dst);
        G1Affine::from(p).to_compressed()
    });
    PyBytes::new_bound(py, &out)
}

#[pyfunction]
fn pairing(py: Python<'_>, p: &[u8], q: &[u8]) -> PyResult<Gt> {
    let a = g1_from(p)?;
    let b = g2_from(q)?;
    Ok(Gt { inner: py.allow_threads(|| bls_pairing(&a, &b)) })
}

/// True iff the product of e(p_i, q_i) is the identity of GT.
#[pyfunction]
fn pairing_check(py: Python<'_>, pairs: Vec<(Vec<u8>, Vec<u8>)>) -> PyResult<bool> {
    let mut g1s = Vec::with_capacity(pairs.len());
    let mut g2s = Vec::with_capacity(pairs.len());
    for (p, q) in &pairs {
        g1s.push(g1_from(p)?);
        g2s.push(G2Prepared::from(g2_from(q)?));
    }
    Ok(py.allow_threads(|| {
        let terms: Vec<(&G1Affine, &G2Prepared)> = g1s.iter().zip(g2s.iter()).collect();
        multi_miller_loop(&terms).final_exponentiation() == bls12_381::Gt::identity()
    }))
}

#[pymodule]
fn _native(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NAME", "native")?;
    m.add("R", BigUint::parse_bytes(R_HEX.as_bytes(), 16).unwrap())?;
    m.add_class::<Gt>()?;
    m.add_function(wrap_pyfunction!(g1_generator, m)?)?;
    m.add_function(wrap_pyfunction!(g2_generator, m)?)?;
    m.add_function(wrap_pyfunction!(g1_validate, m)?)?;
    m.add_function(wrap_pyfunction!(g2_validate, m)?)?;
    m.add_function(wrap_pyfunction!(g1_mul, m)?)?;
    m.add_function(wrap_pyfunction!(g2_mul, m)?)?;
    m.add_function(wrap_pyfunction!(g1_add, m)?)?;
    m.add_function(wrap_pyfunction!(g2_add, m)?)?;
    m.add_function(wrap_pyfunction!(g1_neg, m)?)?;
    m.add_function(wrap_pyfunction!(hash_to_g1, m)?)?;
    m.add_function(wrap_pyfunction!(pairing, m)?)?;
    m.add_function(wrap_pyfunction!(pairing_check, m)?)?;
    Ok(())
}
