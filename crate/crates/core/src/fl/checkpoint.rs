//! Binary model checkpoints.
//!
//! Layout: 8-byte magic, u32 version, u8 family, three u32 shape fields
//! (inputs, hidden, classes; hidden is 0 for logistic), u64 value count, then
//! the values as little-endian f64.

use std::io::{Read, Write};

use super::{FlError, Layout, ModelParams};

const MAGIC: &[u8; 8] = b"OFEDCKPT";
const VERSION: u32 = 1;

pub fn write_checkpoint(model: &ModelParams, mut w: impl Write) -> Result<(), FlError> {
    model.check()?;
    let (family, inputs, hidden, classes) = match model.layout {
        Layout::Logistic { inputs, classes } => (0u8, inputs, 0, classes),
        Layout::Mlp { inputs, hidden, classes } => (1u8, inputs, hidden, classes),
    };
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[family])?;
    for d in [inputs, hidden, classes] {
        let d = u32::try_from(d).map_err(|_| FlError::Checkpoint(format!("dimension {d} exceeds u32")))?;
        w.write_all(&d.to_le_bytes())?;
    }
    w.write_all(&(model.len() as u64).to_le_bytes())?;
    for v in &model.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N], FlError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| FlError::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(b)
}

pub fn read_checkpoint(mut r: impl Read) -> Result<ModelParams, FlError> {
    if &read_array::<8>(&mut r)? != MAGIC {
        return Err(FlError::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(FlError::Checkpoint(format!("unsupported version {version}")));
    }
    let [family] = read_array::<1>(&mut r)?;
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = u32::from_le_bytes(read_array(&mut r)?) as usize;
    }
    let [inputs, hidden, classes] = dims;
    let layout = match family {
        0 => Layout::Logistic { inputs, classes },
        1 => Layout::Mlp { inputs, hidden, classes },
        f => return Err(FlError::Checkpoint(format!("unknown model family {f}"))),
    };
    let count = u64::from_le_bytes(read_array(&mut r)?) as usize;
    if count != layout.param_count() {
        return Err(FlError::Checkpoint(format!(
            "{count} values stored for {} ({} expected)",
            layout.describe(),
            layout.param_count()
        )));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(f64::from_le_bytes(read_array(&mut r)?));
    }
    let model = ModelParams { layout, values };
    model.check()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl::init_model;

    #[test]
    fn round_trip() {
        for layout in [
            Layout::Logistic { inputs: 20, classes: 4 },
            Layout::Mlp { inputs: 7, hidden: 3, classes: 5 },
        ] {
            let m = init_model(layout, 11);
            let mut buf = Vec::new();
            write_checkpoint(&m, &mut buf).unwrap();
            assert_eq!(buf.len(), 8 + 4 + 1 + 12 + 8 + 8 * m.len());
            assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), m);
        }
    }

    #[test]
    fn rejects_corruption() {
        let m = init_model(Layout::Logistic { inputs: 2, classes: 2 }, 0);
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
    }
}
