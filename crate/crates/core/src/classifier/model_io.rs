//! Binary model format.
//!
//! ```text
//! "PCNN" | version u32 | layer count u32 | layers… | threshold f64
//! layer: tag u8 | dims u32… | weights f64… | biases f64…
//! ```
//! All integers and floats are little-endian. The first layer is always the
//! input descriptor (tag 0, dims channels/height/width).

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::convnet::{ConvNetModel, Layer, Shape};

pub const MODEL_MAGIC: &[u8; 4] = b"PCNN";
pub const MODEL_VERSION: u32 = 1;

const TAG_INPUT: u8 = 0;
const TAG_CONV: u8 = 1;
const TAG_RELU: u8 = 2;
const TAG_MAXPOOL: u8 = 3;
const TAG_DENSE: u8 = 4;
const TAG_SOFTMAX: u8 = 5;

/// Guards against absurd allocations from corrupt headers.
const MAX_TENSOR: usize = 1 << 28;

pub fn write_model<W: Write>(model: &ConvNetModel, mut out: W) -> io::Result<()> {
    out.write_all(MODEL_MAGIC)?;
    out.write_all(&MODEL_VERSION.to_le_bytes())?;
    out.write_all(&(model.layers().len() as u32 + 1).to_le_bytes())?;
    let s = model.input_shape();
    out.write_all(&[TAG_INPUT])?;
    write_u32s(&mut out, &[s.channels, s.height, s.width])?;
    for layer in model.layers() {
        match layer {
            Layer::Conv {
                kernel,
                cin,
                cout,
                weights,
                bias,
            } => {
                out.write_all(&[TAG_CONV])?;
                write_u32s(&mut out, &[*kernel, *cin, *cout])?;
                write_f64s(&mut out, weights)?;
                write_f64s(&mut out, bias)?;
            }
            Layer::Relu => out.write_all(&[TAG_RELU])?,
            Layer::MaxPool { size } => {
                out.write_all(&[TAG_MAXPOOL])?;
                write_u32s(&mut out, &[*size])?;
            }
            Layer::Dense {
                input,
                output,
                weights,
                bias,
            } => {
                out.write_all(&[TAG_DENSE])?;
                write_u32s(&mut out, &[*input, *output])?;
                write_f64s(&mut out, weights)?;
                write_f64s(&mut out, bias)?;
            }
            Layer::Softmax => out.write_all(&[TAG_SOFTMAX])?,
        }
    }
    out.write_all(&model.threshold().to_le_bytes())
}

fn write_u32s<W: Write>(out: &mut W, dims: &[usize]) -> io::Result<()> {
    for &d in dims {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    Ok(())
}

fn write_f64s<W: Write>(out: &mut W, values: &[f64]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)
}

pub fn save_model(model: &ConvNetModel, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_model(model, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(truncated)?;
        Ok(b)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        if n > MAX_TENSOR {
            return Err(Error::ShapeChain(format!("tensor of {n} values is implausibly large")));
        }
        let mut raw = vec![0u8; n * 8];
        self.inner.read_exact(&mut raw).map_err(truncated)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn truncated(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Truncated("model file ended early".into())
    } else {
        Error::Io(e)
    }
}

pub fn read_model<R: Read>(input: R) -> Result<ConvNetModel> {
    let mut r = Reader { inner: input };
    if &r.bytes::<4>()? != MODEL_MAGIC {
        return Err(Error::MagicMismatch);
    }
    let version = r.u32()?;
    if version != MODEL_VERSION as usize {
        return Err(Error::UnsupportedVersion(version as u32));
    }
    let count = r.u32()?;
    if count == 0 || r.u8()? != TAG_INPUT {
        return Err(Error::ShapeChain("first layer must be the input descriptor".into()));
    }
    let input = Shape::new(r.u32()?, r.u32()?, r.u32()?);
    let mut layers = Vec::with_capacity(count.min(64));
    for _ in 1..count {
        let layer = match r.u8()? {
            TAG_CONV => {
                let (kernel, cin, cout) = (r.u32()?, r.u32()?, r.u32()?);
                let n = kernel
                    .checked_mul(kernel)
                    .and_then(|k| k.checked_mul(cin))
                    .and_then(|k| k.checked_mul(cout))
                    .ok_or_else(|| Error::ShapeChain("conv dimensions overflow".into()))?;
                Layer::Conv {
                    kernel,
                    cin,
                    cout,
                    weights: r.f64s(n)?,
                    bias: r.f64s(cout)?,
                }
            }
            TAG_RELU => Layer::Relu,
            TAG_MAXPOOL => Layer::MaxPool { size: r.u32()? },
            TAG_DENSE => {
                let (input, output) = (r.u32()?, r.u32()?);
                let n = input
                    .checked_mul(output)
                    .ok_or_else(|| Error::ShapeChain("dense dimensions overflow".into()))?;
                Layer::Dense {
                    input,
                    output,
                    weights: r.f64s(n)?,
                    bias: r.f64s(output)?,
                }
            }
            TAG_SOFTMAX => Layer::Softmax,
            TAG_INPUT => return Err(Error::ShapeChain("input descriptor may only appear first".into())),
            tag => return Err(Error::ShapeChain(format!("unknown layer tag {tag}"))),
        };
        layers.push(layer);
    }
    let threshold = r.f64()?;
    ConvNetModel::new(input, layers, threshold)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ConvNetModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    read_model(bytes.as_slice())
}
