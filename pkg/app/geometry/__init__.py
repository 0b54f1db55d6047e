# Geometry layer
