# Imaging module initialization
