// SPDX-License-Identifier: Apache-2.0

//! Length-prefixed frames: a 4-byte big-endian length, then the payload.

use std::io;

use diap_core::message::MAX_FRAME_LEN;
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

/// Reads one frame. `Ok(None)` means the peer closed cleanly between
/// frames; EOF anywhere else is a protocol error.
pub async fn read_frame<R: AsyncRead + Unpin + ?Sized>(
    r: &mut R,
) -> Result<Option<Vec<u8>>, FrameError> {
    let mut header = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        let n = r.read(&mut header[got..]).await?;
        if n == 0 {
            return if got == 0 {
                Ok(None)
            } else {
                Err(FrameError::Protocol("truncated frame header".into()))
            };
        }
        got += n;
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME_LEN {
        return Err(FrameError::Protocol(format!(
            "frame length {len} exceeds {MAX_FRAME_LEN}"
        )));
    }
    let mut payload = vec![0u8; len];
    match r.read_exact(&mut payload).await {
        Ok(_) => Ok(Some(payload)),
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
            Err(FrameError::Protocol("truncated frame body".into()))
        }
        Err(e) => Err(e.into()),
    }
}

/// Writes one frame in a single buffered write.
pub async fn write_frame<W: AsyncWrite + Unpin + ?Sized>(
    w: &mut W,
    payload: &[u8],
) -> Result<(), FrameError> {
    let frame = diap_core::message::encode_frame(payload)
        .map_err(|e| FrameError::Protocol(e.to_string()))?;
    w.write_all(&frame).await?;
    w.flush().await?;
    Ok(())
}
