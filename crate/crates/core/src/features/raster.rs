use super::FeatureError;

/// RGB image with channel values in `[0, 1]`, row-major, interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: u32,
    height: u32,
    rgb: Vec<f64>,
}

impl Raster {
    pub fn new(width: u32, height: u32, rgb: Vec<f64>) -> Result<Self, FeatureError> {
        let expected = width as usize * height as usize * 3;
        if rgb.len() != expected || expected == 0 {
            return Err(FeatureError::Raster {
                expected,
                found: rgb.len(),
            });
        }
        Ok(Self { width, height, rgb })
    }

    pub fn filled(width: u32, height: u32, color: [f64; 3]) -> Self {
        let rgb = color.repeat(width as usize * height as usize);
        Self::new(width, height, rgb).expect("positive dimensions")
    }

    pub fn from_rgb8(width: u32, height: u32, bytes: &[u8]) -> Result<Self, FeatureError> {
        Self::new(width, height, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }

    /// Rounds each channel to the nearest 8-bit level.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.rgb
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f64; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, color: [f64; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.rgb[i..i + 3].copy_from_slice(&color);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rgb
    }
}
