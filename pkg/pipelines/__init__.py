# Motion Cluster - etapes multi-frames
