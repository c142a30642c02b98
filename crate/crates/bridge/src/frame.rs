use std::io::{self, BufRead};

/// One newline-terminated frame off the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    Line(Vec<u8>),
    /// A line longer than the limit; its bytes were discarded.
    TooLong(usize),
}

/// Reads up to the next `\n` without ever holding more than `max` bytes.
/// A final line without a newline still counts as a frame. `None` at end
/// of stream.
pub fn read_frame(r: &mut impl BufRead, max: usize) -> io::Result<Option<Frame>> {
    let mut line = Vec::new();
    let mut dropped = 0usize;
    loop {
        let buf = match r.fill_buf() {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        if buf.is_empty() {
            return Ok(match (line.is_empty(), dropped) {
                (true, 0) => None,
                (_, 0) => Some(Frame::Line(line)),
                _ => Some(Frame::TooLong(dropped + line.len())),
            });
        }
        let (chunk, end) = match buf.iter().position(|b| *b == b'\n') {
            Some(i) => (&buf[..i], Some(i + 1)),
            None => (buf, None),
        };
        if dropped > 0 || line.len() + chunk.len() > max {
            dropped += line.len() + chunk.len();
            line.clear();
        } else {
            line.extend_from_slice(chunk);
        }
        let used = end.unwrap_or(buf.len());
        r.consume(used);
        if end.is_some() {
            return Ok(Some(if dropped > 0 { Frame::TooLong(dropped) } else { Frame::Line(line) }));
        }
    }
}
