# Package initialization