# Result file formats and chart rendering
