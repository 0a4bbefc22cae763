//! Plug point for an external (for example learned) image codec.
//!
//! The command runs through the shell. It receives PNG bytes on stdin and
//! must write the reconstructed image as PNG on stdout, exiting 0. The
//! quality token is substituted for `{level}` in the command line and also
//! exported as `DEGRADE_CODEC_LEVEL`.

use std::io::{Read, Write};
use std::path::Path;
use std::process::Stdio;
use std::thread;

use super::OpError;
use crate::process::shell_command;
use crate::raster::Image;

pub const LEVEL_ENV: &str = "DEGRADE_CODEC_LEVEL";

pub fn external_codec_transcode(img: &Image, command: &str, level: &str) -> Result<Image, OpError> {
    let line = command.replace("{level}", level);
    let mut child = shell_command(&line)
        .env(LEVEL_ENV, level)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| OpError::CodecSpawnFailure {
            command: line.clone(),
            reason: e.to_string(),
        })?;

    let png = img.to_png_bytes()?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    // Feed on a separate thread so a codec that streams output before
    // draining its input cannot deadlock us.
    let feeder = thread::spawn(move || {
        // A codec may legitimately stop reading early; a broken pipe here
        // surfaces later as a protocol or exit-status error.
        let _ = stdin.write_all(&png);
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let err_reader = thread::spawn(move || {
        let mut buf = String::new();
        let _ = stderr.read_to_string(&mut buf);
        buf
    });
    let mut output = Vec::new();
    let read_result = stdout.read_to_end(&mut output);
    let _ = feeder.join();
    let status = child.wait().map_err(|e| OpError::CodecSpawnFailure {
        command: line.clone(),
        reason: e.to_string(),
    })?;
    let stderr_text = err_reader.join().unwrap_or_default();

    if !status.success() {
        return Err(OpError::CodecNonzeroExit {
            command: line,
            code: status.code(),
            stderr: stderr_text.trim().to_string(),
        });
    }
    read_result.map_err(|e| OpError::CodecProtocolViolation(format!("reading codec output: {e}")))?;
    if output.is_empty() {
        return Err(OpError::CodecProtocolViolation("codec produced no output".into()));
    }
    let decoded = Image::decode(&output, Path::new("<codec output>"))
        .map_err(|e| OpError::CodecProtocolViolation(format!("undecodable codec output: {e}")))?;
    if decoded.dimensions() != img.dimensions() {
        return Err(OpError::CodecProtocolViolation(format!(
            "codec returned {:?}, expected {:?}",
            decoded.dimensions(),
            img.dimensions()
        )));
    }
    Ok(decoded)
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;

    fn sample() -> Image {
        Image::from_fn(19, 11, |x, y| [(x * 13) as u8, (y * 23) as u8, ((x + y) * 5) as u8])
    }

    #[test]
    fn identity_codec_round_trips() {
        let img = sample();
        assert_eq!(external_codec_transcode(&img, "cat", "high").unwrap(), img);
    }

    #[test]
    fn level_token_is_passed_through() {
        let img = sample();
        let cmd = r#"test "$DEGRADE_CODEC_LEVEL" = med && test "{level}" = med && cat"#;
        assert_eq!(external_codec_transcode(&img, cmd, "med").unwrap(), img);
        assert!(external_codec_transcode(&img, cmd, "low").is_err());
    }

    #[test]
    fn wrong_dimensions_are_a_protocol_violation() {
        let dir = tempfile::tempdir().unwrap();
        let other = dir.path().join("small.png");
        std::fs::write(&other, Image::filled(3, 3, [0; 3]).to_png_bytes().unwrap()).unwrap();
        let cmd = format!("cat > /dev/null; cat '{}'", other.display());
        let err = external_codec_transcode(&sample(), &cmd, "high").unwrap_err();
        assert!(matches!(err, OpError::CodecProtocolViolation(_)), "{err}");
    }

    #[test]
    fn garbage_output_is_a_protocol_violation() {
        let err = external_codec_transcode(&sample(), "cat > /dev/null; echo nonsense", "x").unwrap_err();
        assert!(matches!(err, OpError::CodecProtocolViolation(_)), "{err}");
    }

    #[test]
    fn nonzero_exit_is_reported() {
        let err = external_codec_transcode(&sample(), "cat > /dev/null; echo boom >&2; exit 3", "x").unwrap_err();
        match err {
            OpError::CodecNonzeroExit { code, stderr, .. } => {
                assert_eq!(code, Some(3));
                assert_eq!(stderr, "boom");
            }
            other => panic!("unexpected {other}"),
        }
    }
}
