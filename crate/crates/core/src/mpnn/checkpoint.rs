//! NRLM checkpoints: `"NRLM" | version u16 | L u32 | H u32 | D u32 | f64...`,
//! little-endian, tensors in [`Model::tensors`] order.

use crate::Scalar;

use super::{Architecture, Model, MpnnError};

pub const NRLM_MAGIC: &[u8; 4] = b"NRLM";
pub const NRLM_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 12;

impl<T: Scalar> Model<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let arch = self.architecture();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * arch.parameter_count());
        out.extend_from_slice(NRLM_MAGIC);
        out.extend_from_slice(&NRLM_VERSION.to_le_bytes());
        for v in [arch.layers, arch.hidden, arch.feature_dim] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for t in self.tensors() {
            for v in t {
                out.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MpnnError> {
        let truncated = |needed: usize| MpnnError::Truncated { needed, available: bytes.len() };
        if bytes.len() < 4 {
            return Err(truncated(HEADER_LEN));
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if &magic != NRLM_MAGIC {
            return Err(MpnnError::BadMagic(magic));
        }
        if bytes.len() < HEADER_LEN {
            return Err(truncated(HEADER_LEN));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != NRLM_VERSION {
            return Err(MpnnError::UnsupportedVersion(version));
        }
        let field = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
        let arch = Architecture::new(field(6), field(10), field(14))?;
        let needed = (arch.parameter_count() as u128) * 8 + HEADER_LEN as u128;
        if needed > bytes.len() as u128 {
            return Err(truncated(usize::try_from(needed).unwrap_or(usize::MAX)));
        }
        if needed < bytes.len() as u128 {
            return Err(MpnnError::TrailingBytes(bytes.len() - needed as usize));
        }
        let mut model = Model::zeros(arch);
        let mut values =
            bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        for t in model.tensors_mut() {
            for v in t.iter_mut() {
                let x = values.next().expect("length checked");
                if !x.is_finite() {
                    return Err(MpnnError::NonFiniteParameter);
                }
                *v = T::of(x);
            }
        }
        Ok(model)
    }
}
